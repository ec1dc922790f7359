#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mlkrim/manifold.hpp"
#include "mlkrim/sampling.hpp"
#include "mlkrim/tensor.hpp"

namespace mlkrim {

struct ModelConfig {
  std::size_t m = 1;                    // kernels M
  std::size_t q = 1;                    // depth Q
  std::vector<std::size_t> inner_dims;  // d_1 .. d_{Q-1}
  std::size_t n_l = 1;
  DataDims dims{};

  // d_0 = n_k, d_Q = n_l.
  std::size_t d(std::size_t level) const;
  void validate() const;
};

// Optimization variables. inner[q - 2][m] is the m-th diagonal block of A_q.
struct FactorState {
  Matrix x;                               // n_k x n_fr image estimate
  Matrix z;                               // n_k x n_fr temporal-spectrum auxiliary
  Matrix a1;                              // n_k x d_1 M, horizontal stack
  std::vector<std::vector<Matrix>> inner;  // Q - 1 levels of M blocks d_{q-1} x d_q
  std::vector<Matrix> b;                   // M blocks n_l x n_fr

  std::size_t depth() const noexcept { return inner.size() + 1; }
  std::size_t kernels() const noexcept { return b.size(); }
  // d_1 columns of A_1 belonging to kernel m.
  auto a1_block(std::size_t m) const {
    const auto w = a1.cols() / static_cast<Eigen::Index>(b.size());
    return a1.middleCols(static_cast<Eigen::Index>(m) * w, w);
  }
  // Count of scalar unknowns held in {A_q} and B.
  std::size_t stored_unknowns() const;
};

struct Hyperparams {
  double lambda1 = 1e-3;  // l1 on B
  double lambda2 = 1.0;   // coupling of Z with F_t(X)
  double lambda3 = 0.1;   // l1 on Z
  double lambda4 = 1e-3;  // ridge on A_q
  double tau_x = 1e-2;
  double tau_z = 1e-2;
  double tau_a = 100.0;
  double tau_b = 100.0;
  double gamma0 = 1.0;
  double zeta = 0.02;
  std::size_t max_outer = 300;
  double tol_rel = 1e-5;
  double b_inner_tol = 1e-6;
  std::size_t b_inner_max = 300;

  void validate() const;
};

// Defaults with lambda3 scaled by the RMS of the k-space data.
Hyperparams default_hyperparams(const ComplexTensor3& y);

// Right chains R_m = A_{level+1,m} ... A_{Q,m} K_m B_m for every kernel
// (d_level x n_fr). level = Q gives K_m B_m.
std::vector<Matrix> right_chains(const FactorState& s, const KernelDictionary& k, std::size_t level);
// Left chains L_m = A_{1,m} ... A_{level-1,m} (n_k x d_{level-1}), level >= 2.
std::vector<Matrix> left_chains(const FactorState& s, std::size_t level);

// sum_m A_{1,m} ... A_{Q,m} K_m B_m, evaluated right to left.
Matrix forward(const FactorState& s, const KernelDictionary& k);

// G = A_1 ... A_Q K as n_k x M n_l, so that forward = G * vstack(B_m).
Matrix dictionary_product(const FactorState& s, const KernelDictionary& k);

// Dense assembly of the block matrices, for checking forward() on small cases.
struct AssembledBlocks {
  Matrix a1;
  std::vector<Matrix> inner;  // block-diagonal A_2 .. A_Q
  Matrix kernel;              // block-diagonal K
  Matrix b;                   // stacked B

  Matrix product() const;
};

AssembledBlocks assemble_blocks(const FactorState& s, const KernelDictionary& k,
                                std::size_t max_entries = 1u << 22);

Matrix block_diagonal(const std::vector<Matrix>& blocks);
Matrix stack_rows(const std::vector<Matrix>& blocks);

struct ObjectiveTerms {
  double fit = 0.0;      // 1/2 ||X - forward||^2
  double b_l1 = 0.0;     // lambda1 ||B||_1
  double coupling = 0.0; // lambda2/2 ||Z - F_t X||^2
  double z_l1 = 0.0;     // lambda3 ||Z||_1
  double ridge = 0.0;    // lambda4/2 sum ||A_q||^2

  double total() const noexcept { return fit + b_l1 + coupling + z_l1 + ridge; }
};

ObjectiveTerms objective_terms(const FactorState& s, const KernelDictionary& k,
                               const Hyperparams& hp);

struct ConstraintReport {
  double max_column_sum_error = 0.0;  // max |1^H B_m e_t - 1|
  double max_consistency_error = 0.0; // max over sampled entries |F(X) - y|
};

ConstraintReport check_constraints(const FactorState& s, const SamplingMask& mask,
                                   const ComplexTensor3& y);

// Objective of the full problem. Throws StateError when the affine constraint
// is off by more than 1e-8 or data consistency by more than 1e-6 (relative to
// the largest sample magnitude).
double objective(const FactorState& s, const KernelDictionary& k, const SamplingMask& mask,
                 const ComplexTensor3& y, const Hyperparams& hp);

// Unknowns for depth Q (first) and for the Q = 1 model (second).
struct ParameterCount {
  std::uint64_t general = 0;
  std::uint64_t single_layer = 0;
};

ParameterCount parameter_count(const ModelConfig& cfg);

FactorState init_state(const ModelConfig& cfg, const KernelDictionary& k,
                       const SamplingMask& mask, const ComplexTensor3& y, std::uint64_t seed);

// Entrywise l1 norm of a complex matrix (sum of moduli).
double l1_norm(const Matrix& m);

}  // namespace mlkrim
