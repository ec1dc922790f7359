#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "mlkrim/manifold.hpp"
#include "mlkrim/metrics.hpp"
#include "mlkrim/model.hpp"
#include "mlkrim/sampling.hpp"

namespace mlkrim {

// gamma * (1 - zeta * gamma). Requires gamma in (0, 1], zeta in (0, 1).
double gamma_step(double gamma, double zeta);

// Complex soft-thresholding z * max(0, 1 - alpha / |z|), 0 at z = 0.
cdouble soft_threshold(cdouble z, double alpha);
Matrix soft_threshold(const Matrix& z, double alpha);

// Exact minimizer of the X sub-problem under data consistency.
Matrix update_x(const FactorState& s, const KernelDictionary& k, const SamplingMask& mask,
                const ComplexTensor3& y, const Hyperparams& hp);

// Exact minimizer of the Z sub-problem.
Matrix update_z(const FactorState& s, const Hyperparams& hp);

// Ridge-proximal least squares for the horizontal stack A_1.
Matrix update_a1(const FactorState& s, const KernelDictionary& k, const Hyperparams& hp);

// Block-diagonal A_q, 2 <= q <= Q: solves the Kronecker normal equations for
// all M blocks jointly.
std::vector<Matrix> update_aq(const FactorState& s, const KernelDictionary& k,
                              const Hyperparams& hp, std::size_t q);

struct AffineLassoOptions {
  double lambda1 = 0.0;
  double tau = 0.0;       // proximal weight towards the previous B
  double rho = -1.0;      // ADMM penalty; negative selects tau + 1
  double tol = 1e-6;
  std::size_t max_iter = 300;
};

struct AffineLassoResult {
  Matrix b;                      // M n_l x n_fr, block m in rows [m n_l, (m+1) n_l)
  std::size_t max_iterations = 0;
  double max_primal_residual = 0.0;
  double max_dual_residual = 0.0;
  bool converged = true;         // false when the cap was hit with residual > 10 tol
};

// Column-wise solution of
//   min_b 1/2 ||x_t - G b||^2 + lambda1 ||b||_1 + tau/2 ||b - prev_t||^2
//   s.t. each length-n_l block of b sums to 1
// by ADMM with a single cached Cholesky factor of G^H G + (tau + rho) I.
AffineLassoResult solve_affine_lasso(const Matrix& g, const Matrix& x, const Matrix& prev,
                                     std::size_t blocks, const AffineLassoOptions& opt);

struct BUpdate {
  std::vector<Matrix> b;
  std::size_t max_iterations = 0;
  double max_primal_residual = 0.0;
  double max_dual_residual = 0.0;
  bool converged = true;
};

BUpdate update_b(const FactorState& s, const KernelDictionary& k, const Hyperparams& hp);

struct IterationReport {
  std::size_t n = 0;
  double gamma = 0.0;
  double objective = 0.0;
  double rel_change = 0.0;
  double consistency_error = 0.0;
  double column_sum_error = 0.0;
  std::size_t b_iterations = 0;
  double b_primal_residual = 0.0;
  double b_dual_residual = 0.0;
  bool b_warning = false;
  double seconds = 0.0;
};

void write_trace_csv(std::ostream& os, const std::vector<IterationReport>& trace,
                     bool with_timing);

struct SolveResult {
  FactorState state;
  std::vector<IterationReport> trace;  // entry 0 is the initial state
};

// Called with every outer iterate, including the initial state (n = 0).
using IterateObserver = std::function<void(std::size_t n, const FactorState&)>;

// Successive convex approximation: all half-updates are computed from the
// current iterate, then every variable moves by gamma_{n+1} towards them.
SolveResult sca_solve(const ModelConfig& cfg, const KernelDictionary& k, const SamplingMask& mask,
                      const ComplexTensor3& y, const Hyperparams& hp, std::uint64_t seed,
                      const IterateObserver& observer = {});

struct RestartRun {
  std::uint64_t seed = 0;
  SolveResult result;
  std::optional<MetricReport> metrics;
};

struct RestartSummary {
  std::vector<RestartRun> runs;
  std::optional<MetricReport> mean;  // present when a reference image was supplied
  std::size_t best = 0;              // run with the lowest final objective
};

// Runs sca_solve once per seed. Metrics are computed against truth when given.
RestartSummary multi_restart(const ModelConfig& cfg, const KernelDictionary& k,
                             const SamplingMask& mask, const ComplexTensor3& y,
                             const Hyperparams& hp, const std::vector<std::uint64_t>& seeds,
                             const ComplexTensor3* truth = nullptr);

}  // namespace mlkrim
