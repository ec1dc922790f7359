#include <doctest.h>

#include "mlkrim/error.hpp"
#include "support.hpp"

using namespace mlkrim;
using oracle::Rng;

namespace {

// Left-to-right product of every factor, one kernel at a time.
Matrix naive_forward(const FactorState& s, const KernelDictionary& k) {
  Matrix out = Matrix::Zero(s.x.rows(), s.b[0].cols());
  for (std::size_t m = 0; m < s.kernels(); ++m) {
    Matrix chain = s.a1_block(m);
    for (const auto& level : s.inner) chain = (chain * level[m]).eval();
    out += chain * k.grams[m] * s.b[m];
  }
  return out;
}

KernelDictionary identity_dictionary(std::size_t m, Eigen::Index n_l) {
  KernelDictionary k;
  for (std::size_t i = 0; i < m; ++i) {
    k.specs.push_back(KernelSpec::gaussian(1.0));
    k.grams.push_back(Matrix::Identity(n_l, n_l));
  }
  return k;
}

}  // namespace

TEST_CASE("model configuration checks") {
  ModelConfig c;
  c.dims = DataDims(4, 4, 8);
  c.m = 2;
  c.q = 3;
  c.inner_dims = {2, 6};
  c.n_l = 5;
  CHECK_NOTHROW(c.validate());
  CHECK(c.d(0) == 16);
  CHECK(c.d(1) == 2);
  CHECK(c.d(2) == 6);
  CHECK(c.d(3) == 5);
  c.inner_dims = {2};
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c.inner_dims = {2, 0};
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c.inner_dims = {2, 6};
  c.n_l = 9;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("forward with identity factors selects landmarks") {
  FactorState s;
  const Eigen::Index n_k = 6, n_l = 3;
  s.a1 = Matrix::Identity(n_k, n_l);
  s.b = {Matrix::Identity(n_l, n_l)};
  s.x = Matrix::Zero(n_k, n_l);
  CHECK(forward(s, identity_dictionary(1, n_l)) == Matrix::Identity(n_k, n_l));
}

TEST_CASE("forward with a one-hot B copies the first Gram column") {
  Rng rng(41);
  oracle::TinyProblem p = oracle::make_tiny(rng, 3);
  for (auto& b : p.state.b) {
    b.setZero();
    b.row(0).setOnes();
  }
  const Matrix out = forward(p.state, p.kernels);
  Vector expect = Vector::Zero(out.rows());
  for (std::size_t m = 0; m < p.state.kernels(); ++m) {
    Matrix chain = p.state.a1_block(m);
    for (const auto& level : p.state.inner) chain = (chain * level[m]).eval();
    expect += chain * p.kernels.grams[m].col(0);
  }
  for (Eigen::Index t = 0; t < out.cols(); ++t) CHECK((out.col(t) - expect).norm() < 1e-12 * expect.norm());
}

TEST_CASE("forward matches the per-kernel triple product") {
  Rng rng(42);
  FactorState s;
  s.a1 = oracle::random_matrix(4, 4, rng);  // d_1 = 2, M = 2
  s.inner = {{oracle::random_matrix(2, 2, rng), oracle::random_matrix(2, 2, rng)},
             {oracle::random_matrix(2, 3, rng), oracle::random_matrix(2, 3, rng)}};
  s.b = {oracle::random_matrix(3, 2, rng), oracle::random_matrix(3, 2, rng)};
  s.x = Matrix::Zero(4, 2);
  LandmarkSet lm{oracle::random_matrix(2, 3, rng), {0, 1, 2}};
  const auto k = build_dictionary(lm, {KernelSpec::gaussian(1.0), KernelSpec::polynomial(2, 1.0, 0.5)});
  CHECK(oracle::rel_err(forward(s, k), naive_forward(s, k)) < 1e-12);
  CHECK(oracle::rel_err(dictionary_product(s, k) * stack_rows(s.b), forward(s, k)) < 1e-12);
}

TEST_CASE("dense block assembly") {
  Rng rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const oracle::TinyProblem p = oracle::make_tiny(rng);
    const AssembledBlocks blocks = assemble_blocks(p.state, p.kernels);
    CHECK(oracle::rel_err(blocks.product(), forward(p.state, p.kernels)) < 1e-12);
    const Eigen::Index n_l = Eigen::Index(p.cfg.n_l);
    for (std::size_t m = 0; m < p.cfg.m; ++m) CHECK(blocks.b.middleRows(Eigen::Index(m) * n_l, n_l) == p.state.b[m]);
    if (p.cfg.m == 2) {
      CHECK(blocks.kernel.topRightCorner(n_l, n_l).isZero(0.0));
      CHECK(blocks.kernel.bottomLeftCorner(n_l, n_l).isZero(0.0));
      CHECK(blocks.kernel.topLeftCorner(n_l, n_l) == p.kernels.grams[0]);
    }
  }
  const oracle::TinyProblem p = oracle::make_tiny(rng);
  CHECK_THROWS_AS(assemble_blocks(p.state, p.kernels, 2), ParameterError);
}

TEST_CASE("objective bookkeeping") {
  Rng rng(44);
  oracle::TinyProblem p = oracle::make_tiny(rng);
  auto& s = p.state;
  s.a1.setZero();
  for (auto& level : s.inner)
    for (auto& blk : level) blk.setZero();
  for (auto& b : s.b) b.setConstant(1.0 / double(p.cfg.n_l));
  const ObjectiveTerms t = objective_terms(s, p.kernels, p.hp);
  const double expect = 0.5 * s.x.squaredNorm() + p.hp.lambda1 * double(p.cfg.m * p.cfg.dims.n_fr) +
                        0.5 * p.hp.lambda2 * (s.z - oracle::naive_temporal(s.x, true)).squaredNorm() +
                        p.hp.lambda3 * s.z.cwiseAbs().sum();
  CHECK(t.total() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(t.ridge == 0.0);

  // Zero regularization at an exact fit.
  oracle::TinyProblem q = oracle::make_tiny(rng);
  q.hp.lambda1 = q.hp.lambda2 = q.hp.lambda3 = q.hp.lambda4 = 0.0;
  q.state.x = forward(q.state, q.kernels);
  q.state.z = temporal_dft(q.state.x, Direction::Forward);
  CHECK(objective_terms(q.state, q.kernels, q.hp).total() < 1e-20);

  for (int trial = 0; trial < 20; ++trial) {
    const oracle::TinyProblem r = oracle::make_tiny(rng);
    const ObjectiveTerms terms = objective_terms(r.state, r.kernels, r.hp);
    CHECK(terms.total() >= 0.0);
    double ridge = r.state.a1.squaredNorm();
    for (const auto& level : r.state.inner)
      for (const auto& blk : level) ridge += blk.squaredNorm();
    CHECK(terms.ridge == doctest::Approx(0.5 * r.hp.lambda4 * ridge));
  }
}

TEST_CASE("objective rejects infeasible states") {
  Rng rng(45);
  oracle::TinyProblem p = oracle::make_tiny(rng);
  p.mask = SamplingMask(p.cfg.dims, 1);
  p.y = dft2_frames(matrix_to_tensor(p.state.x, p.cfg.dims), Direction::Forward);
  CHECK(objective(p.state, p.kernels, p.mask, p.y, p.hp) ==
        doctest::Approx(objective_terms(p.state, p.kernels, p.hp).total()));

  oracle::TinyProblem bad_b = p;
  bad_b.state.b[0](0, 0) += 1e-3;
  CHECK_THROWS_AS(objective(bad_b.state, bad_b.kernels, bad_b.mask, bad_b.y, bad_b.hp), StateError);

  oracle::TinyProblem bad_x = p;
  bad_x.state.x(0, 0) += 1e-2;
  CHECK_THROWS_AS(objective(bad_x.state, bad_x.kernels, bad_x.mask, bad_x.y, bad_x.hp), StateError);
}

TEST_CASE("objective is invariant under jointly permuting kernels") {
  Rng rng(46);
  for (int trial = 0; trial < 20; ++trial) {
    oracle::TinyProblem p = oracle::make_tiny(rng);
    if (p.cfg.m != 2) continue;
    oracle::TinyProblem swapped = p;
    std::swap(swapped.kernels.specs[0], swapped.kernels.specs[1]);
    std::swap(swapped.kernels.grams[0], swapped.kernels.grams[1]);
    const Eigen::Index d1 = Eigen::Index(p.cfg.d(1));
    swapped.state.a1.leftCols(d1) = p.state.a1.rightCols(d1);
    swapped.state.a1.rightCols(d1) = p.state.a1.leftCols(d1);
    for (auto& level : swapped.state.inner) std::swap(level[0], level[1]);
    std::swap(swapped.state.b[0], swapped.state.b[1]);
    CHECK(objective_terms(swapped.state, swapped.kernels, swapped.hp).total() ==
          doctest::Approx(objective_terms(p.state, p.kernels, p.hp).total()).epsilon(1e-12));
  }
}

TEST_CASE("parameter counts") {
  ModelConfig c;
  c.dims = DataDims(128, 128, 200);
  c.m = 7;
  c.q = 2;
  c.inner_dims = {6};
  c.n_l = 100;
  const ParameterCount pc = parameter_count(c);
  CHECK(pc.general == 832328);
  CHECK(pc.single_layer == 11608800);

  ModelConfig one = c;
  one.q = 1;
  one.inner_dims.clear();
  CHECK(parameter_count(one).general == parameter_count(one).single_layer);

  ModelConfig twice = c;
  twice.m = 14;
  CHECK(parameter_count(twice).general == 2 * pc.general);
  CHECK(parameter_count(twice).single_layer == 2 * pc.single_layer);

  Rng rng(47);
  for (int trial = 0; trial < 30; ++trial) {
    const oracle::TinyProblem p = oracle::make_tiny(rng);
    CHECK(parameter_count(p.cfg).general == p.state.stored_unknowns());
    const FactorState init = init_state(p.cfg, p.kernels, p.mask, p.y, 5);
    CHECK(parameter_count(p.cfg).general == init.stored_unknowns());
  }
}

TEST_CASE("initial state satisfies the constraints") {
  Rng rng(48);
  for (int trial = 0; trial < 20; ++trial) {
    const oracle::TinyProblem p = oracle::make_tiny(rng);
    const FactorState s = init_state(p.cfg, p.kernels, p.mask, p.y, 9);
    const auto k = dft2_frames(matrix_to_tensor(s.x, p.cfg.dims), Direction::Forward);
    for (std::size_t i = 0; i < k.data().size(); ++i) {
      if (p.mask.bits()[i]) CHECK(std::abs(k.data()[i] - p.y.data()[i]) < 1e-12);
    }
    for (const auto& b : s.b) CHECK((b.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK(oracle::rel_err(s.z, oracle::naive_temporal(s.x, true)) < 1e-12);
    CHECK(oracle::rel_err(s.x, tensor_to_matrix(zero_filled(p.mask, p.y))) < 1e-14);

    const FactorState again = init_state(p.cfg, p.kernels, p.mask, p.y, 9);
    CHECK(again.a1 == s.a1);
    CHECK(again.x == s.x);
    CHECK(!(init_state(p.cfg, p.kernels, p.mask, p.y, 10).a1 == s.a1));
  }

  // Entry scale follows 1 / sqrt(d_{q-1}).
  ModelConfig c;
  c.dims = DataDims(32, 32, 4);
  c.q = 2;
  c.inner_dims = {40};
  c.n_l = 4;
  LandmarkSet lm{oracle::random_matrix(2, 4, rng), {0, 1, 2, 3}};
  const auto k = build_dictionary(lm, {KernelSpec::gaussian(1.0)});
  const ComplexTensor3 y(c.dims);
  const FactorState s = init_state(c, k, SamplingMask(c.dims, 1), y, 3);
  CHECK(s.a1.squaredNorm() / double(s.a1.size()) == doctest::Approx(1.0 / 1024.0).epsilon(0.05));
}

TEST_CASE("a depth-two model reproduces any rank-limited single-layer target") {
  Rng rng(49);
  const Eigen::Index n_k = 6, n_l = 4, d1 = 2, n_fr = 5;
  LandmarkSet lm{oracle::random_matrix(3, n_l, rng), {0, 1, 2, 3}};
  const auto k = build_dictionary(lm, {KernelSpec::gaussian(2.0)});
  const Matrix left = oracle::random_matrix(n_k, d1, rng);
  const Matrix right = oracle::random_matrix(d1, n_l, rng);
  const Matrix b = oracle::column_normalized_b(n_l, n_fr, rng);

  FactorState single;
  single.a1 = left * right;
  single.b = {b};
  FactorState deep;
  deep.a1 = left;
  deep.inner = {{right}};
  deep.b = {b};
  CHECK(oracle::rel_err(forward(deep, k), forward(single, k)) < 1e-10);
}
