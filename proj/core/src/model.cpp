#include "mlkrim/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mlkrim/error.hpp"

namespace mlkrim {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

}  // namespace

std::size_t ModelConfig::d(std::size_t level) const {
  if (level == 0) return dims.n_k();
  if (level == q) return n_l;
  if (level > q) throw ParameterError("level exceeds model depth");
  return inner_dims.at(level - 1);
}

void ModelConfig::validate() const {
  if (m < 1) throw ParameterError("model needs at least one kernel");
  if (q < 1) throw ParameterError("model depth Q must be >= 1");
  if (inner_dims.size() != q - 1) {
    throw ParameterError("Q=" + std::to_string(q) + " needs " + std::to_string(q - 1) +
                         " inner dimensions, got " + std::to_string(inner_dims.size()));
  }
  if (std::any_of(inner_dims.begin(), inner_dims.end(), [](std::size_t v) { return v == 0; })) {
    throw ParameterError("inner dimensions must be positive");
  }
  if (n_l < 1 || n_l > dims.n_fr) {
    throw ParameterError("n_l must lie in [1, n_fr]");
  }
}

std::size_t FactorState::stored_unknowns() const {
  std::size_t n = static_cast<std::size_t>(a1.size());
  for (const auto& level : inner)
    for (const auto& blk : level) n += static_cast<std::size_t>(blk.size());
  for (const auto& blk : b) n += static_cast<std::size_t>(blk.size());
  return n;
}

void Hyperparams::validate() const {
  for (double v : {lambda1, lambda2, lambda3, lambda4}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError("lambda weights must be >= 0");
  }
  for (double v : {tau_x, tau_z, tau_a, tau_b}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ParameterError("tau weights must be > 0");
  }
  if (!(gamma0 > 0.0 && gamma0 <= 1.0)) throw ParameterError("gamma0 must lie in (0, 1]");
  if (!(zeta > 0.0 && zeta < 1.0)) throw ParameterError("zeta must lie in (0, 1)");
  if (!(tol_rel >= 0.0)) throw ParameterError("tol_rel must be >= 0");
  if (!(b_inner_tol > 0.0) || b_inner_max < 1) {
    throw ParameterError("B inner solver needs tol > 0 and at least one iteration");
  }
}

Hyperparams default_hyperparams(const ComplexTensor3& y) {
  Hyperparams hp;
  const double rms = y.norm() / std::sqrt(static_cast<double>(y.dims().size()));
  if (rms > 0.0) hp.lambda3 *= rms;
  return hp;
}

double l1_norm(const Matrix& m) { return m.cwiseAbs().sum(); }

std::vector<Matrix> right_chains(const FactorState& s, const KernelDictionary& k,
                                 std::size_t level) {
  const std::size_t depth = s.depth();
  std::vector<Matrix> out(s.kernels());
  for (std::size_t m = 0; m < s.kernels(); ++m) {
    Matrix r = k.grams[m] * s.b[m];
    for (std::size_t q = depth; q > level; --q) r = s.inner[q - 2][m] * r;
    out[m] = std::move(r);
  }
  return out;
}

std::vector<Matrix> left_chains(const FactorState& s, std::size_t level) {
  std::vector<Matrix> out(s.kernels());
  for (std::size_t m = 0; m < s.kernels(); ++m) {
    Matrix l = s.a1_block(m);
    for (std::size_t q = 2; q < level; ++q) l = l * s.inner[q - 2][m];
    out[m] = std::move(l);
  }
  return out;
}

Matrix stack_rows(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = 0;
  for (const auto& b : blocks) rows += b.rows();
  Matrix out(rows, blocks.empty() ? 0 : blocks[0].cols());
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return out;
}

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

Matrix forward(const FactorState& s, const KernelDictionary& k) {
  if (k.size() != s.kernels()) throw ShapeError("state and dictionary disagree on M");
  for (std::size_t m = 0; m < s.kernels(); ++m) {
    if (k.grams[m].cols() != s.b[m].rows()) throw ShapeError("Gram and B block sizes differ");
  }
  return s.a1 * stack_rows(right_chains(s, k, 1));
}

Matrix dictionary_product(const FactorState& s, const KernelDictionary& k) {
  const auto n_l = k.grams.at(0).rows();
  Matrix g(s.a1.rows(), n_l * idx(s.kernels()));
  const auto lefts = left_chains(s, s.depth() + 1);
  for (std::size_t m = 0; m < s.kernels(); ++m) {
    g.middleCols(idx(m) * n_l, n_l) = lefts[m] * k.grams[m];
  }
  return g;
}

Matrix AssembledBlocks::product() const {
  Matrix p = a1;
  for (const auto& a : inner) p = p * a;
  return p * kernel * b;
}

AssembledBlocks assemble_blocks(const FactorState& s, const KernelDictionary& k,
                                std::size_t max_entries) {
  if (static_cast<std::size_t>(s.a1.size()) > max_entries) {
    throw ParameterError("dense assembly refused: A_1 has " + std::to_string(s.a1.size()) +
                         " entries, cap is " + std::to_string(max_entries));
  }
  AssembledBlocks out;
  out.a1 = s.a1;
  for (const auto& level : s.inner) out.inner.push_back(block_diagonal(level));
  out.kernel = block_diagonal(k.grams);
  out.b = stack_rows(s.b);
  return out;
}

ObjectiveTerms objective_terms(const FactorState& s, const KernelDictionary& k,
                               const Hyperparams& hp) {
  ObjectiveTerms t;
  t.fit = 0.5 * (s.x - forward(s, k)).squaredNorm();
  for (const auto& blk : s.b) t.b_l1 += l1_norm(blk);
  t.b_l1 *= hp.lambda1;
  t.coupling = 0.5 * hp.lambda2 * (s.z - temporal_dft(s.x, Direction::Forward)).squaredNorm();
  t.z_l1 = hp.lambda3 * l1_norm(s.z);
  double a = s.a1.squaredNorm();
  for (const auto& level : s.inner)
    for (const auto& blk : level) a += blk.squaredNorm();
  t.ridge = 0.5 * hp.lambda4 * a;
  return t;
}

ConstraintReport check_constraints(const FactorState& s, const SamplingMask& mask,
                                   const ComplexTensor3& y) {
  ConstraintReport rep;
  for (const auto& blk : s.b) {
    for (Eigen::Index t = 0; t < blk.cols(); ++t) {
      rep.max_column_sum_error =
          std::max(rep.max_column_sum_error, std::abs(blk.col(t).sum() - cdouble(1.0, 0.0)));
    }
  }
  const ComplexTensor3 kx = dft2_frames(matrix_to_tensor(s.x, y.dims()), Direction::Forward);
  auto bits = mask.bits();
  auto a = kx.data();
  auto b = y.data();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) rep.max_consistency_error = std::max(rep.max_consistency_error, std::abs(a[i] - b[i]));
  }
  return rep;
}

double objective(const FactorState& s, const KernelDictionary& k, const SamplingMask& mask,
                 const ComplexTensor3& y, const Hyperparams& hp) {
  const ConstraintReport rep = check_constraints(s, mask, y);
  if (rep.max_column_sum_error > 1e-8) {
    throw StateError("affine constraint violated: column sum error " +
                     std::to_string(rep.max_column_sum_error));
  }
  double ymax = 0.0;
  for (const auto& v : y.data()) ymax = std::max(ymax, std::abs(v));
  if (rep.max_consistency_error > 1e-6 * std::max(1.0, ymax)) {
    throw StateError("data consistency violated: error " +
                     std::to_string(rep.max_consistency_error));
  }
  return objective_terms(s, k, hp).total();
}

ParameterCount parameter_count(const ModelConfig& cfg) {
  cfg.validate();
  const std::uint64_t m = cfg.m, n_l = cfg.n_l, n_fr = cfg.dims.n_fr, n_k = cfg.dims.n_k();
  std::uint64_t chain = 0;
  for (std::size_t q = 1; q <= cfg.q; ++q) chain += std::uint64_t{cfg.d(q - 1)} * cfg.d(q);
  return {m * (chain + n_fr * n_l), m * (n_k * n_l + n_fr * n_l)};
}

FactorState init_state(const ModelConfig& cfg, const KernelDictionary& k,
                       const SamplingMask& mask, const ComplexTensor3& y, std::uint64_t seed) {
  cfg.validate();
  if (!(y.dims() == cfg.dims) || !(mask.dims() == cfg.dims)) {
    throw ShapeError("data, mask and model dims differ");
  }
  if (k.size() != cfg.m || k.n_l() != cfg.n_l) {
    throw ShapeError("kernel dictionary does not match model (M, n_l)");
  }
  FactorState s;
  s.x = tensor_to_matrix(zero_filled(mask, y));
  s.z = temporal_dft(s.x, Direction::Forward);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Complex Gaussian with E|a|^2 = std^2.
  auto fill = [&](Eigen::Index rows, Eigen::Index cols, double std_dev) {
    Matrix out(rows, cols);
    const double part = std_dev / std::sqrt(2.0);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        const double re = normal(rng);
        const double im = normal(rng);
        out(r, c) = cdouble(part * re, part * im);
      }
    }
    return out;
  };

  s.a1 = fill(idx(cfg.d(0)), idx(cfg.d(1) * cfg.m), 1.0 / std::sqrt(static_cast<double>(cfg.d(0))));
  s.inner.resize(cfg.q - 1);
  for (std::size_t q = 2; q <= cfg.q; ++q) {
    for (std::size_t m = 0; m < cfg.m; ++m) {
      s.inner[q - 2].push_back(
          fill(idx(cfg.d(q - 1)), idx(cfg.d(q)), 1.0 / std::sqrt(static_cast<double>(cfg.d(q - 1)))));
    }
  }
  s.b.assign(cfg.m, Matrix::Constant(idx(cfg.n_l), idx(cfg.dims.n_fr),
                                     cdouble(1.0 / static_cast<double>(cfg.n_l), 0.0)));
  return s;
}

}  // namespace mlkrim
