#include "mlkrim/solver.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>

#include "mlkrim/error.hpp"
#include "mlkrim/parallel.hpp"

namespace mlkrim {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

Eigen::LLT<Matrix> factor_pd(const Matrix& a, const char* what) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": system matrix is not positive definite");
  }
  return llt;
}

}  // namespace

double gamma_step(double gamma, double zeta) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ParameterError("gamma must lie in (0, 1]");
  if (!(zeta > 0.0 && zeta < 1.0)) throw ParameterError("zeta must lie in (0, 1)");
  return gamma * (1.0 - zeta * gamma);
}

cdouble soft_threshold(cdouble z, double alpha) {
  const double mag = std::abs(z);
  if (mag <= alpha || mag == 0.0) return {0.0, 0.0};
  return z * (1.0 - alpha / mag);
}

Matrix soft_threshold(const Matrix& z, double alpha) {
  return z.unaryExpr([alpha](cdouble v) { return soft_threshold(v, alpha); });
}

Matrix update_x(const FactorState& s, const KernelDictionary& k, const SamplingMask& mask,
                const ComplexTensor3& y, const Hyperparams& hp) {
  // The unconstrained objective is isotropic around x_star, so the constrained
  // minimizer is the orthogonal projection of x_star onto the consistent set.
  const double w = 1.0 + hp.lambda2 + hp.tau_x;
  const Matrix x_star = (forward(s, k) + hp.lambda2 * temporal_dft(s.z, Direction::Inverse) +
                         hp.tau_x * s.x) / w;
  ComplexTensor3 kx = dft2_frames(matrix_to_tensor(x_star, y.dims()), Direction::Forward);
  auto bits = mask.bits();
  auto data = kx.data();
  auto obs = y.data();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) data[i] = obs[i];
  }
  return tensor_to_matrix(dft2_frames(kx, Direction::Inverse));
}

Matrix update_z(const FactorState& s, const Hyperparams& hp) {
  const double w = hp.lambda2 + hp.tau_z;
  if (!(w > 0.0)) throw ParameterError("lambda2 + tau_z must be positive");
  const Matrix center = (hp.lambda2 * temporal_dft(s.x, Direction::Forward) + hp.tau_z * s.z) / w;
  return soft_threshold(center, hp.lambda3 / w);
}

Matrix update_a1(const FactorState& s, const KernelDictionary& k, const Hyperparams& hp) {
  const double c = hp.lambda4 + hp.tau_a;
  if (!(c >= 0.0)) throw ParameterError("lambda4 + tau_a must be nonnegative");
  const Matrix r = stack_rows(right_chains(s, k, 1));
  Matrix normal = r * r.adjoint();
  normal.diagonal().array() += c;
  const Matrix rhs = r * s.x.adjoint() + hp.tau_a * s.a1.adjoint();
  return factor_pd(normal, "A_1 update").solve(rhs).adjoint();
}

std::vector<Matrix> update_aq(const FactorState& s, const KernelDictionary& k,
                              const Hyperparams& hp, std::size_t q) {
  if (q < 2 || q > s.depth()) throw ParameterError("update_aq needs 2 <= q <= Q");
  const double c = hp.lambda4 + hp.tau_a;
  if (!(c >= 0.0)) throw ParameterError("lambda4 + tau_a must be nonnegative");
  const auto lefts = left_chains(s, q);
  const auto rights = right_chains(s, k, q);
  const auto& prev = s.inner[q - 2];
  const std::size_t blocks = s.kernels();
  const Eigen::Index p = prev[0].rows(), r = prev[0].cols(), n = p * r;

  // vec(L W R) = (R^T kron L) vec(W); the normal-equation block (m, m') is
  // (R_{m'} R_m^H)^T kron (L_m^H L_{m'}).
  Matrix system(n * idx(blocks), n * idx(blocks));
  Vector rhs(n * idx(blocks));
  for (std::size_t m = 0; m < blocks; ++m) {
    for (std::size_t mp = 0; mp < blocks; ++mp) {
      const Matrix ll = lefts[m].adjoint() * lefts[mp];
      const Matrix rr = (rights[mp] * rights[m].adjoint()).transpose();
      auto blk = system.block(idx(m) * n, idx(mp) * n, n, n);
      for (Eigen::Index a = 0; a < r; ++a)
        for (Eigen::Index b = 0; b < r; ++b) blk.block(a * p, b * p, p, p) = rr(a, b) * ll;
    }
    const Matrix target = lefts[m].adjoint() * s.x * rights[m].adjoint() + hp.tau_a * prev[m];
    rhs.segment(idx(m) * n, n) = Eigen::Map<const Vector>(target.data(), n);
  }
  system.diagonal().array() += c;
  // Symmetrize away round-off so the Cholesky factor sees an exactly Hermitian matrix.
  system = (0.5 * (system + system.adjoint())).eval();
  const Vector theta = factor_pd(system, "A_q update").solve(rhs);
  std::vector<Matrix> out(blocks);
  for (std::size_t m = 0; m < blocks; ++m) {
    out[m] = Eigen::Map<const Matrix>(theta.data() + idx(m) * n, p, r);
  }
  return out;
}

AffineLassoResult solve_affine_lasso(const Matrix& g, const Matrix& x, const Matrix& prev,
                                     std::size_t blocks, const AffineLassoOptions& opt) {
  const Eigen::Index dim = g.cols(), cols = x.cols();
  if (blocks == 0 || dim % idx(blocks) != 0) throw ShapeError("B rows not divisible into blocks");
  if (prev.rows() != dim || prev.cols() != cols || g.rows() != x.rows()) {
    throw ShapeError("affine lasso operands have inconsistent shapes");
  }
  if (!(opt.lambda1 >= 0.0) || !(opt.tau >= 0.0)) throw ParameterError("lambda1, tau must be >= 0");
  const Eigen::Index n_l = dim / idx(blocks);
  const double rho = opt.rho > 0.0 ? opt.rho : opt.tau + 1.0;

  Matrix p = g.adjoint() * g;
  p.diagonal().array() += opt.tau + rho;
  const auto chol = factor_pd(p, "B update");

  // Equality constraints E b = 1 with E the block-sum operator.
  Matrix e_t = Matrix::Zero(dim, idx(blocks));
  for (std::size_t m = 0; m < blocks; ++m) e_t.block(idx(m) * n_l, idx(m), n_l, 1).setOnes();
  const Matrix p_inv_et = chol.solve(e_t);
  const Matrix schur = e_t.adjoint() * p_inv_et;
  const auto schur_llt = factor_pd(schur, "B update (Schur complement)");

  const Matrix linear = g.adjoint() * x + opt.tau * prev;
  const Matrix ones = Matrix::Ones(idx(blocks), cols);

  Matrix w = prev;
  Matrix u = Matrix::Zero(dim, cols);
  Matrix b(dim, cols);
  std::vector<bool> active(static_cast<std::size_t>(cols), true);
  std::vector<std::size_t> iters(static_cast<std::size_t>(cols), 0);
  std::vector<double> primal(static_cast<std::size_t>(cols), 0.0), dual(primal);
  const double alpha = opt.lambda1 / rho;

  std::size_t remaining = static_cast<std::size_t>(cols);
  for (std::size_t it = 1; it <= opt.max_iter && remaining > 0; ++it) {
    // Batched KKT solve: b = P^{-1}(c + rho (w - u)) corrected onto E b = 1.
    const Matrix b_free = chol.solve(linear + rho * (w - u));
    const Matrix nu = schur_llt.solve(e_t.adjoint() * b_free - ones);
    const Matrix b_new = b_free - p_inv_et * nu;
    for (Eigen::Index t = 0; t < cols; ++t) {
      const auto ti = static_cast<std::size_t>(t);
      if (!active[ti]) continue;
      b.col(t) = b_new.col(t);
      const Vector w_old = w.col(t);
      w.col(t) = (b.col(t) + u.col(t)).unaryExpr([alpha](cdouble v) { return soft_threshold(v, alpha); });
      u.col(t) += b.col(t) - w.col(t);
      primal[ti] = (b.col(t) - w.col(t)).norm();
      dual[ti] = rho * (w.col(t) - w_old).norm();
      iters[ti] = it;
      const double scale_p = std::max({1.0, b.col(t).norm(), w.col(t).norm()});
      const double scale_d = std::max(1.0, rho * u.col(t).norm());
      if (primal[ti] <= opt.tol * scale_p && dual[ti] <= opt.tol * scale_d) {
        active[ti] = false;
        --remaining;
      }
    }
  }

  AffineLassoResult res;
  res.b = w;
  for (Eigen::Index t = 0; t < cols; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    res.max_iterations = std::max(res.max_iterations, iters[ti]);
    res.max_primal_residual = std::max(res.max_primal_residual, primal[ti]);
    res.max_dual_residual = std::max(res.max_dual_residual, dual[ti]);
    if (active[ti] && (primal[ti] > 10.0 * opt.tol * std::max(1.0, b.col(t).norm()) ||
                       dual[ti] > 10.0 * opt.tol * std::max(1.0, rho * u.col(t).norm()))) {
      res.converged = false;
    }
    // Restore exact block sums on the sparse iterate, keeping its zero pattern.
    for (std::size_t m = 0; m < blocks; ++m) {
      auto seg = res.b.col(t).segment(idx(m) * n_l, n_l);
      const cdouble defect = cdouble(1.0, 0.0) - seg.sum();
      Eigen::Index support = 0;
      for (Eigen::Index j = 0; j < n_l; ++j) support += seg(j) != cdouble(0.0, 0.0);
      if (support == 0) {
        seg.array() += defect / static_cast<double>(n_l);
      } else {
        const cdouble share = defect / static_cast<double>(support);
        for (Eigen::Index j = 0; j < n_l; ++j)
          if (seg(j) != cdouble(0.0, 0.0)) seg(j) += share;
      }
    }
  }
  return res;
}

BUpdate update_b(const FactorState& s, const KernelDictionary& k, const Hyperparams& hp) {
  const Matrix g = dictionary_product(s, k);
  AffineLassoOptions opt;
  opt.lambda1 = hp.lambda1;
  opt.tau = hp.tau_b;
  opt.tol = hp.b_inner_tol;
  opt.max_iter = hp.b_inner_max;
  const auto res = solve_affine_lasso(g, s.x, stack_rows(s.b), s.kernels(), opt);
  BUpdate out;
  const Eigen::Index n_l = s.b[0].rows();
  for (std::size_t m = 0; m < s.kernels(); ++m) out.b.push_back(res.b.middleRows(idx(m) * n_l, n_l));
  out.max_iterations = res.max_iterations;
  out.max_primal_residual = res.max_primal_residual;
  out.max_dual_residual = res.max_dual_residual;
  out.converged = res.converged;
  return out;
}

void write_trace_csv(std::ostream& os, const std::vector<IterationReport>& trace,
                     bool with_timing) {
  os << "n,gamma,objective,rel_change,consistency_error,column_sum_error,b_iterations,"
        "b_primal_residual,b_dual_residual,b_warning,seconds\n";
  os << std::setprecision(17);
  for (const auto& r : trace) {
    os << r.n << ',' << r.gamma << ',' << r.objective << ',' << r.rel_change << ','
       << r.consistency_error << ',' << r.column_sum_error << ',' << r.b_iterations << ','
       << r.b_primal_residual << ',' << r.b_dual_residual << ',' << (r.b_warning ? 1 : 0) << ','
       << (with_timing ? r.seconds : 0.0) << '\n';
  }
}

namespace {

void require_finite(const Matrix& m, const char* subtask, std::size_t n) {
  if (!m.allFinite()) {
    throw NumericalError(std::string("divergence in ") + subtask + " update at iteration " +
                         std::to_string(n));
  }
}

}  // namespace

SolveResult sca_solve(const ModelConfig& cfg, const KernelDictionary& k, const SamplingMask& mask,
                      const ComplexTensor3& y, const Hyperparams& hp, std::uint64_t seed,
                      const IterateObserver& observer) {
  hp.validate();
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();

  SolveResult out;
  out.state = init_state(cfg, k, mask, y, seed);
  FactorState& s = out.state;

  auto report = [&](std::size_t n, double gamma, double prev_obj, const BUpdate* bu) {
    IterationReport rep;
    rep.n = n;
    rep.gamma = gamma;
    rep.objective = objective_terms(s, k, hp).total();
    if (!std::isfinite(rep.objective)) {
      throw NumericalError("objective became non-finite at iteration " + std::to_string(n));
    }
    rep.rel_change = std::isfinite(prev_obj)
                         ? std::abs(rep.objective - prev_obj) / std::max(std::abs(prev_obj), 1e-300)
                         : 0.0;
    const auto cons = check_constraints(s, mask, y);
    rep.consistency_error = cons.max_consistency_error;
    rep.column_sum_error = cons.max_column_sum_error;
    if (bu) {
      rep.b_iterations = bu->max_iterations;
      rep.b_primal_residual = bu->max_primal_residual;
      rep.b_dual_residual = bu->max_dual_residual;
      rep.b_warning = !bu->converged;
    }
    rep.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    out.trace.push_back(rep);
    if (observer) observer(n, s);
  };

  double gamma = hp.gamma0;
  report(0, gamma, std::numeric_limits<double>::quiet_NaN(), nullptr);

  std::size_t calm = 0;
  for (std::size_t n = 1; n <= hp.max_outer; ++n) {
    const double next_gamma = gamma_step(gamma, hp.zeta);

    // Jacobi sweep: every half-update reads the iterate-n state only.
    Matrix x_half = update_x(s, k, mask, y, hp);
    require_finite(x_half, "X", n);
    Matrix z_half = update_z(s, hp);
    require_finite(z_half, "Z", n);
    Matrix a1_half = update_a1(s, k, hp);
    require_finite(a1_half, "A_1", n);
    std::vector<std::vector<Matrix>> inner_half;
    for (std::size_t q = 2; q <= s.depth(); ++q) {
      inner_half.push_back(update_aq(s, k, hp, q));
      for (const auto& blk : inner_half.back()) require_finite(blk, "A_q", n);
    }
    BUpdate b_half = update_b(s, k, hp);
    for (const auto& blk : b_half.b) require_finite(blk, "B", n);

    const double g = next_gamma, h = 1.0 - next_gamma;
    s.x = g * x_half + h * s.x;
    s.z = g * z_half + h * s.z;
    s.a1 = g * a1_half + h * s.a1;
    for (std::size_t q = 0; q < inner_half.size(); ++q)
      for (std::size_t m = 0; m < s.kernels(); ++m)
        s.inner[q][m] = g * inner_half[q][m] + h * s.inner[q][m];
    for (std::size_t m = 0; m < s.kernels(); ++m) s.b[m] = g * b_half.b[m] + h * s.b[m];
    gamma = next_gamma;

    report(n, gamma, out.trace.back().objective, &b_half);
    calm = out.trace.back().rel_change < hp.tol_rel ? calm + 1 : 0;
    if (calm >= 5) break;
  }
  return out;
}

RestartSummary multi_restart(const ModelConfig& cfg, const KernelDictionary& k,
                             const SamplingMask& mask, const ComplexTensor3& y,
                             const Hyperparams& hp, const std::vector<std::uint64_t>& seeds,
                             const ComplexTensor3* truth) {
  if (seeds.empty()) throw ParameterError("multi_restart needs at least one seed");
  RestartSummary summary;
  std::vector<MetricReport> reports;
  for (std::uint64_t seed : seeds) {
    RestartRun run;
    run.seed = seed;
    try {
      run.result = sca_solve(cfg, k, mask, y, hp, seed);
    } catch (const NumericalError& e) {
      throw NumericalError("seed " + std::to_string(seed) + ": " + e.what());
    } catch (const ParameterError& e) {
      throw ParameterError("seed " + std::to_string(seed) + ": " + e.what());
    }
    if (truth) {
      run.metrics = evaluate(*truth, matrix_to_tensor(run.result.state.x, y.dims()));
      reports.push_back(*run.metrics);
    }
    summary.runs.push_back(std::move(run));
  }
  for (std::size_t i = 1; i < summary.runs.size(); ++i) {
    if (summary.runs[i].result.trace.back().objective <
        summary.runs[summary.best].result.trace.back().objective) {
      summary.best = i;
    }
  }
  if (truth) summary.mean = mean_report(reports);
  return summary;
}

}  // namespace mlkrim
