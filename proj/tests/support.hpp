#pragma once

// Independent reference implementations used by the unit and acceptance tests.
// Nothing here calls the library routine it is meant to check.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mlkrim/dataset.hpp"
#include "mlkrim/manifold.hpp"
#include "mlkrim/model.hpp"
#include "mlkrim/sampling.hpp"
#include "mlkrim/solver.hpp"
#include "mlkrim/tensor.hpp"

namespace oracle {

using namespace mlkrim;
using Rng = std::mt19937_64;

inline cdouble random_complex(Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = random_complex(rng, scale);
  return m;
}

inline ComplexTensor3 random_tensor(const DataDims& d, Rng& rng) {
  ComplexTensor3 t(d);
  for (auto& v : t.data()) v = random_complex(rng);
  return t;
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

// Centred 2D DFT by direct summation: bin k carries frequency k - floor(n/2).
inline Matrix dft2_matrix(std::size_t n_f, std::size_t n_p, bool forward) {
  const double sign = forward ? -1.0 : 1.0;
  const std::size_t n = n_f * n_p;
  const double cf = static_cast<double>(n_f / 2), cp = static_cast<double>(n_p / 2);
  Matrix w(n, n);
  for (std::size_t i2 = 0; i2 < n_p; ++i2)
    for (std::size_t r2 = 0; r2 < n_f; ++r2)
      for (std::size_t i = 0; i < n_p; ++i)
        for (std::size_t r = 0; r < n_f; ++r) {
          // forward: (k = (r2, i2), x = (r, i)); inverse swaps the roles.
          const double kf = forward ? r2 - cf : r - cf;
          const double kp = forward ? i2 - cp : i - cp;
          const double xf = forward ? r : r2;
          const double xp = forward ? i : i2;
          const double phase = 2.0 * std::numbers::pi * (kf * xf / n_f + kp * xp / n_p);
          w(i2 * n_f + r2, i * n_f + r) = std::polar(1.0 / std::sqrt(double(n)), sign * phase);
        }
  return w;
}

inline ComplexTensor3 naive_dft2(const ComplexTensor3& x, bool forward) {
  const auto& d = x.dims();
  const Matrix w = dft2_matrix(d.n_f, d.n_p, forward);
  return matrix_to_tensor(w * tensor_to_matrix(x), d);
}

inline Matrix temporal_dft_matrix(std::size_t n, bool forward) {
  const double sign = forward ? -1.0 : 1.0;
  Matrix w(n, n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t t = 0; t < n; ++t)
      w(k, t) = std::polar(1.0 / std::sqrt(double(n)),
                           sign * 2.0 * std::numbers::pi * double(k * t) / double(n));
  return w;
}

// Rows are time series, so the transform acts from the right.
inline Matrix naive_temporal(const Matrix& x, bool forward) {
  return x * temporal_dft_matrix(static_cast<std::size_t>(x.cols()), forward).transpose();
}

struct TinyProblem {
  ModelConfig cfg;
  KernelDictionary kernels;
  SamplingMask mask;
  ComplexTensor3 y;
  FactorState state;
  Hyperparams hp;
};

inline Matrix column_normalized_b(Eigen::Index n_l, Eigen::Index n_fr, Rng& rng) {
  Matrix b = random_matrix(n_l, n_fr, rng);
  for (Eigen::Index t = 0; t < n_fr; ++t) {
    const cdouble defect = cdouble(1.0) - b.col(t).sum();
    b.col(t).array() += defect / double(n_l);
  }
  return b;
}

// Random instance with n_k <= 8, n_l <= 4, n_fr <= 5, M <= 2, Q <= 3. Regularizers
// are drawn log-uniformly so every sub-problem is exercised away from its limits.
inline TinyProblem make_tiny(Rng& rng, std::size_t q_override = 0) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  auto loguni = [&](double lo, double hi) {
    return std::exp(std::uniform_real_distribution<double>(std::log(lo), std::log(hi))(rng));
  };
  TinyProblem p;
  const std::size_t n_f = pick(1, 2);
  const std::size_t n_p = pick(2, n_f == 1 ? 8 : 4);
  const std::size_t n_fr = pick(2, 5);
  p.cfg.dims = DataDims(n_f, n_p, n_fr);
  p.cfg.m = pick(1, 2);
  p.cfg.q = q_override ? q_override : pick(1, 3);
  p.cfg.n_l = pick(1, std::min<std::size_t>(4, n_fr));
  for (std::size_t i = 1; i < p.cfg.q; ++i) p.cfg.inner_dims.push_back(pick(1, 3));

  LandmarkSet lm;
  lm.points = random_matrix(3, static_cast<Eigen::Index>(p.cfg.n_l), rng);
  for (std::size_t i = 0; i < p.cfg.n_l; ++i) lm.indices.push_back(i);
  std::vector<KernelSpec> specs = {KernelSpec::gaussian(loguni(0.5, 8.0)),
                                   KernelSpec::polynomial(2, 1.0, 0.3)};
  specs.resize(p.cfg.m);
  p.kernels = build_dictionary(lm, specs);

  p.mask = SamplingMask(p.cfg.dims);
  std::bernoulli_distribution coin(0.5);
  for (auto& b : p.mask.bits()) b = coin(rng) ? 1 : 0;
  p.y = apply_sampling(p.mask, random_tensor(p.cfg.dims, rng));

  const auto rows = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
  auto& s = p.state;
  s.x = random_matrix(rows(p.cfg.dims.n_k()), rows(n_fr), rng);
  s.z = random_matrix(rows(p.cfg.dims.n_k()), rows(n_fr), rng);
  s.a1 = random_matrix(rows(p.cfg.dims.n_k()), rows(p.cfg.d(1) * p.cfg.m), rng);
  for (std::size_t q = 2; q <= p.cfg.q; ++q) {
    std::vector<Matrix> level;
    for (std::size_t m = 0; m < p.cfg.m; ++m)
      level.push_back(random_matrix(rows(p.cfg.d(q - 1)), rows(p.cfg.d(q)), rng));
    s.inner.push_back(level);
  }
  for (std::size_t m = 0; m < p.cfg.m; ++m)
    s.b.push_back(column_normalized_b(rows(p.cfg.n_l), rows(n_fr), rng));

  p.hp.lambda1 = loguni(1e-3, 0.5);
  p.hp.lambda2 = loguni(1e-2, 2.0);
  p.hp.lambda3 = loguni(1e-3, 0.5);
  p.hp.lambda4 = loguni(1e-3, 0.5);
  p.hp.tau_x = loguni(1e-2, 1.0);
  p.hp.tau_z = loguni(1e-2, 1.0);
  p.hp.tau_a = loguni(1e-2, 1.0);
  p.hp.tau_b = loguni(1e-2, 1.0);
  return p;
}

// Sub-problem objectives, written from their definitions.
inline double x_subobjective(const TinyProblem& p, const Matrix& x) {
  const Matrix c = forward(p.state, p.kernels);
  const Matrix zt = naive_temporal(x, true);
  return 0.5 * (x - c).squaredNorm() + 0.5 * p.hp.lambda2 * (p.state.z - zt).squaredNorm() +
         0.5 * p.hp.tau_x * (x - p.state.x).squaredNorm();
}

inline double b_subobjective(const Matrix& g, const Matrix& x, const Matrix& prev, const Matrix& b,
                             double lambda1, double tau) {
  return 0.5 * (x - g * b).squaredNorm() + lambda1 * b.cwiseAbs().sum() +
         0.5 * tau * (b - prev).squaredNorm();
}

// Projection onto {each length-n_l block of every column sums to 1}.
inline void project_block_sums(Matrix& b, Eigen::Index n_l) {
  for (Eigen::Index t = 0; t < b.cols(); ++t)
    for (Eigen::Index s = 0; s < b.rows(); s += n_l) {
      auto seg = b.col(t).segment(s, n_l);
      const cdouble defect = cdouble(1.0) - seg.sum();
      seg.array() += defect / double(n_l);
    }
}

// Projected subgradient for the B sub-problem (strongly convex when tau > 0):
// step 2 / (mu (k + 2)) and the k-weighted average of the iterates.
inline Matrix subgradient_b(const Matrix& g, const Matrix& x, const Matrix& prev, Eigen::Index n_l,
                            double lambda1, double tau, std::size_t iters) {
  const double mu = tau + 1e-12;
  Matrix b = prev;
  project_block_sums(b, n_l);
  Matrix avg = Matrix::Zero(b.rows(), b.cols());
  double weight = 0.0;
  const Matrix gh = g.adjoint();
  const Matrix ghg = gh * g;
  const Matrix ghx = gh * x;
  const double lip = Eigen::SelfAdjointEigenSolver<Matrix>(ghg).eigenvalues().maxCoeff() + tau;
  const Matrix linear = ghx + tau * prev;
  Matrix grad(b.rows(), b.cols());
  for (std::size_t k = 0; k < iters; ++k) {
    grad.noalias() = ghg * b;
    grad += tau * b - linear;
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      const double mag = std::abs(b(i));
      if (mag > 0.0) grad(i) += lambda1 * b(i) / mag;
    }
    b -= std::min(1.0 / lip, 2.0 / (mu * (double(k) + 2.0))) * grad;
    project_block_sums(b, n_l);
    const double w = double(k) + 1.0;
    avg += w * b;
    weight += w;
  }
  return avg / weight;
}

// Projected gradient on the X sub-problem with the consistency constraint
// written as explicit rows of the direct-summation DFT matrix.
inline Matrix x_oracle(const TinyProblem& p, std::size_t iters = 400) {
  const auto& d = p.cfg.dims;
  const Matrix phi = dft2_matrix(d.n_f, d.n_p, true);
  const Matrix c = forward(p.state, p.kernels);
  const Matrix wt = temporal_dft_matrix(d.n_fr, true).transpose();
  const Matrix y = tensor_to_matrix(p.y);
  const RealMatrix m = p.mask.as_matrix();

  auto project = [&](Matrix& x) {
    for (std::size_t t = 0; t < d.n_fr; ++t) {
      std::vector<Eigen::Index> rows;
      for (Eigen::Index k = 0; k < m.rows(); ++k)
        if (m(k, Eigen::Index(t)) != 0.0) rows.push_back(k);
      if (rows.empty()) continue;
      Matrix a(Eigen::Index(rows.size()), phi.cols());
      Vector rhs(Eigen::Index(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        a.row(Eigen::Index(i)) = phi.row(rows[i]);
        rhs(Eigen::Index(i)) = y(rows[i], Eigen::Index(t));
      }
      const Vector resid = a * x.col(Eigen::Index(t)) - rhs;
      x.col(Eigen::Index(t)) -= a.adjoint() * (a * a.adjoint()).completeOrthogonalDecomposition().solve(resid);
    }
  };

  const double lip = 1.0 + p.hp.lambda2 + p.hp.tau_x;
  Matrix x = p.state.x;
  project(x);
  for (std::size_t k = 0; k < iters; ++k) {
    const Matrix grad = (x - c) + p.hp.lambda2 * (x * wt - p.state.z) * wt.adjoint() +
                        p.hp.tau_x * (x - p.state.x);
    x -= grad / lip;
    project(x);
  }
  return x;
}

// Shrinking 2D grid search for one complex scalar of the Z sub-problem.
inline cdouble z_scalar_oracle(cdouble a, cdouble b, double lambda2, double tau, double lambda3) {
  auto f = [&](cdouble z) {
    return 0.5 * lambda2 * std::norm(z - a) + 0.5 * tau * std::norm(z - b) + lambda3 * std::abs(z);
  };
  cdouble center = 0.0;
  double half = std::abs(a) + std::abs(b) + 1.0;
  for (int round = 0; round < 80; ++round) {
    cdouble best = center;
    double best_f = f(center);
    for (int i = -10; i <= 10; ++i)
      for (int j = -10; j <= 10; ++j) {
        const cdouble z = center + cdouble(i * half / 10.0, j * half / 10.0);
        const double v = f(z);
        if (v < best_f) best_f = v, best = z;
      }
    center = best;
    half *= 0.25;
  }
  // The grid stalls near sqrt(eps); finish with Newton steps on the stationarity condition away from 0.
  const cdouble pull = lambda2 * a + tau * b;
  const double w = lambda2 + tau;
  auto gradient = [&](cdouble z) { return w * z - pull + lambda3 * z / std::abs(z); };
  for (int it = 0; it < 50 && std::abs(center) > 0.0; ++it) {
    const double r = std::abs(center);
    const cdouble u = center / r;
    const cdouble grad = gradient(center);
    const Eigen::Vector2d gv(grad.real(), grad.imag()), uv(u.real(), u.imag());
    const Eigen::Matrix2d hess = w * Eigen::Matrix2d::Identity() + lambda3 / r * (Eigen::Matrix2d::Identity() - uv * uv.transpose());
    const Eigen::Vector2d step = hess.ldlt().solve(gv);
    const cdouble next = center - cdouble(step(0), step(1));
    if (!(std::abs(next) > 0.0 && std::abs(gradient(next)) < std::abs(grad))) break;
    center = next;
  }
  return center;
}

// A_1 sub-problem as one stacked least-squares system solved by pseudo-inverse:
// [R^H; sqrt(lambda4) I; sqrt(tau) I] A^H = [X^H; 0; sqrt(tau) A_prev^H].
inline Matrix a1_oracle(const TinyProblem& p) {
  const auto& s = p.state;
  std::vector<Matrix> chains;
  for (std::size_t m = 0; m < s.kernels(); ++m) {
    Matrix r = p.kernels.grams[m] * s.b[m];
    for (std::size_t q = s.depth(); q > 1; --q) r = (s.inner[q - 2][m] * r).eval();
    chains.push_back(r);
  }
  const Matrix r = stack_rows(chains);
  const Eigen::Index w = r.rows(), n = r.cols();
  Matrix lhs = Matrix::Zero(n + 2 * w, w);
  Matrix rhs = Matrix::Zero(n + 2 * w, s.x.rows());
  lhs.topRows(n) = r.adjoint();
  lhs.middleRows(n, w).diagonal().setConstant(std::sqrt(p.hp.lambda4));
  lhs.bottomRows(w).diagonal().setConstant(std::sqrt(p.hp.tau_a));
  rhs.topRows(n) = s.x.adjoint();
  rhs.bottomRows(w) = std::sqrt(p.hp.tau_a) * s.a1.adjoint();
  return lhs.completeOrthogonalDecomposition().solve(rhs).adjoint();
}

// A_q sub-problem: the linear operator W -> forward() is tabulated column by
// column on unit inputs, then the stacked ridge system is solved directly.
inline std::vector<Matrix> aq_oracle(const TinyProblem& p, std::size_t q) {
  FactorState probe = p.state;
  auto& level = probe.inner[q - 2];
  const Eigen::Index rows = level[0].rows(), cols = level[0].cols(), per = rows * cols;
  const Eigen::Index unknowns = per * Eigen::Index(level.size());
  const Eigen::Index out = p.state.x.size();
  Matrix op(out, unknowns);
  for (Eigen::Index u = 0; u < unknowns; ++u) {
    for (auto& blk : level) blk.setZero();
    level[std::size_t(u / per)](u % per % rows, u % per / rows) = 1.0;
    const Matrix f = forward(probe, p.kernels);
    op.col(u) = Eigen::Map<const Vector>(f.data(), out);
  }
  Vector prev(unknowns);
  for (std::size_t m = 0; m < level.size(); ++m)
    prev.segment(Eigen::Index(m) * per, per) = Eigen::Map<const Vector>(p.state.inner[q - 2][m].data(), per);
  Matrix lhs = Matrix::Zero(out + 2 * unknowns, unknowns);
  Vector rhs = Vector::Zero(out + 2 * unknowns);
  lhs.topRows(out) = op;
  lhs.middleRows(out, unknowns).diagonal().setConstant(std::sqrt(p.hp.lambda4));
  lhs.bottomRows(unknowns).diagonal().setConstant(std::sqrt(p.hp.tau_a));
  rhs.head(out) = Eigen::Map<const Vector>(p.state.x.data(), out);
  rhs.tail(unknowns) = std::sqrt(p.hp.tau_a) * prev;
  const Vector theta = lhs.completeOrthogonalDecomposition().solve(rhs);
  std::vector<Matrix> blocks;
  for (std::size_t m = 0; m < level.size(); ++m)
    blocks.push_back(Eigen::Map<const Matrix>(theta.data() + Eigen::Index(m) * per, rows, cols));
  return blocks;
}

// Default desk-scale scenario shared by the slow tests and the acceptance runner.
// SSIM by explicit summation over each 11x11 window, two-pass moments.
inline double ssim_direct(const std::vector<RealMatrix>& a, const std::vector<RealMatrix>& b) {
  double range = 0.0;
  for (const auto& f : a) range = std::max(range, f.cwiseAbs().maxCoeff());
  for (const auto& f : b) range = std::max(range, f.cwiseAbs().maxCoeff());
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
  double w[11][11], wsum = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      w[i][j] = std::exp(-((i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0)) / 4.5);
      wsum += w[i][j];
    }
  double total = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const RealMatrix x = a[t].cwiseAbs(), y = b[t].cwiseAbs();
    double frame_sum = 0.0;
    int windows = 0;
    for (Eigen::Index r0 = 0; r0 + 11 <= x.rows(); ++r0)
      for (Eigen::Index c0 = 0; c0 + 11 <= x.cols(); ++c0) {
        double mx = 0.0, my = 0.0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            mx += w[i][j] / wsum * x(r0 + i, c0 + j);
            my += w[i][j] / wsum * y(r0 + i, c0 + j);
          }
        double vx = 0.0, vy = 0.0, cxy = 0.0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double dx = x(r0 + i, c0 + j) - mx, dy = y(r0 + i, c0 + j) - my;
            vx += w[i][j] / wsum * dx * dx;
            vy += w[i][j] / wsum * dy * dy;
            cxy += w[i][j] / wsum * dx * dy;
          }
        frame_sum += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++windows;
      }
    total += frame_sum / windows;
  }
  return total / double(a.size());
}

struct Scenario {
  ComplexTensor3 truth;
  SamplingMask mask;
  ComplexTensor3 y;
  ModelConfig cfg;
  KernelDictionary kernels;
  Hyperparams hp;
};

inline Scenario desk_scenario(bool radial, double acceleration) {
  Scenario sc;
  const DataDims dims(64, 64, 32);
  const std::size_t upsilon = 6;
  const Phantom ph = generate_phantom(default_phantom(dims));
  sc.truth = ph.image;
  if (radial) {
    const std::size_t spokes = radial_spokes_for_rate(dims, acceleration, upsilon, 1);
    sc.mask = radial_mask(dims, spokes, upsilon, 1);
  } else {
    sc.mask = cartesian_mask(dims, acceleration, upsilon, 1);
  }
  sc.y = apply_sampling(sc.mask, ph.kspace);
  sc.cfg.m = 1;
  sc.cfg.q = 2;
  sc.cfg.inner_dims = {6};
  sc.cfg.n_l = 16;
  sc.cfg.dims = dims;
  const LandmarkSet lm = select_landmarks(extract_navigator(sc.y, upsilon), sc.cfg.n_l);
  sc.kernels = build_dictionary(lm, default_specs(lm, sc.cfg.m));
  sc.hp = default_hyperparams(sc.y);
  return sc;
}

}  // namespace oracle
