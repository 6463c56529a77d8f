#include "doctest.h"
#include "oracles.hpp"

#include "corral/base_learner.hpp"
#include <Eigen/Eigenvalues>
#include "corral/corral_learner.hpp"

using namespace corral;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Pushes a base to the boundary of its clipped ball with a constant loss.
BaseLearner saturated_base(double p, int d, double gamma) {
  BaseLearner b(1, 0.5, gamma, DomainSpec::lp_ball(p), d);
  Vec loss = Vec::Ones(d);
  for (int k = 0; k < 200; ++k) b.update(loss * 50.0);
  return b;
}

}  // namespace

// ---------------------------------------------------------------------------
// parameters

TEST_CASE("derived parameters at the reference point") {
  const auto cp = derive_params(2.0, 4, 10000, 4);
  CHECK(cp.C == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(cp.gamma == doctest::Approx(0.04).epsilon(1e-14));
  CHECK(cp.eta == doctest::Approx(0.0025).epsilon(1e-14));
  CHECK(cp.epsilon == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(cp.beta == doctest::Approx(0.32).epsilon(1e-14));
  CHECK(cp.lambda == doctest::Approx(6.25e-4).epsilon(1e-14));
  CHECK(cp.mu == doctest::Approx(1e-4).epsilon(1e-14));

  CHECK_THROWS_AS(derive_params(2.0, 4, 100, 100), ConfigError);
  CHECK_THROWS_AS(derive_params(2.5, 4, 100, 1), ConfigError);

  const auto g = derive_params(2.0, 4, 10000, 4, DomainSpec::Kind::Gauge, 1.0);
  const double C = std::sqrt(1.0 / 18.0);
  CHECK(g.C == doctest::Approx(C).epsilon(1e-14));
  CHECK(g.gamma == doctest::Approx(4 * C * 2.0 * 0.02).epsilon(1e-13));
  CHECK(g.eta == doctest::Approx(C * 0.5 * 0.02).epsilon(1e-13));
  CHECK(g.epsilon == doctest::Approx(0.01).epsilon(1e-13));
  CHECK(g.beta == doctest::Approx(0.32).epsilon(1e-13));
  CHECK(g.lambda == doctest::Approx(C * 0.5 / 200.0).epsilon(1e-13));

  CorralParams bad = cp;
  bad.beta = 0.6;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// base learner

TEST_CASE("base learner initial state and proposals") {
  BaseLearner b(3, 0.01, 0.04, DomainSpec::lp_ball(2.0), 3);
  CHECK(b.iterate().norm() == 0.0);
  CHECK(b.radius() == doctest::Approx(0.96));
  RngStream r1(4), r2(4);
  int counts[6] = {0, 0, 0, 0, 0, 0};
  for (int k = 0; k < 60000; ++k) {
    const Proposal a = b.propose(r1), c = b.propose(r2);
    CHECK(a.xi == 0);
    CHECK((a.axis == c.axis && a.sign == c.sign));
    ++counts[2 * a.axis + (a.sign < 0 ? 1 : 0)];
  }
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("proposal frequency and unbiasedness") {
  const double gamma = 0.1;
  BaseLearner b = saturated_base(1.5, 3, gamma);
  REQUIRE(b.norm() == doctest::Approx(1.0 - gamma).epsilon(1e-9));
  RngStream rng(77);
  const int N = 100000;
  int ones = 0;
  for (int k = 0; k < N; ++k) ones += b.propose(rng).xi;
  const double sd = std::sqrt(N * (1 - gamma) * gamma);
  CHECK(std::abs(ones - N * (1 - gamma)) <= 3 * sd);

  // E[a~] = a
  BaseLearner m(1, 0.05, 0.04, DomainSpec::lp_ball(2.0), 2);
  m.update(vec({3.0, -7.0}));
  const int M = 1000000;
  Vec sum = Vec::Zero(2), sq = Vec::Zero(2);
  for (int k = 0; k < M; ++k) {
    const Vec x = m.proposal_vector(m.propose(rng));
    sum += x;
    sq += x.cwiseProduct(x);
  }
  const Vec mean = sum / M;
  for (int i = 0; i < 2; ++i) {
    const double s = std::sqrt(sq[i] / M - mean[i] * mean[i]);
    CHECK(std::abs(mean[i] - m.iterate()[i]) <= 5 * s / std::sqrt(double(M)));
  }
}

TEST_CASE("base update against the bisection oracle") {
  BaseLearner b(1, 0.01, 0.04, DomainSpec::lp_ball(2.0), 2);
  const Vec before = b.iterate();
  b.update(Vec::Zero(2));
  CHECK((b.iterate() - before).norm() == 0.0);

  // two one-sparse steps; grad R(x) = 2x / (1 - |x|^2) inverted by bisection on |x|
  b.update_sparse(0, 7.0);
  b.update_sparse(1, -3.0);
  const Vec g = -0.01 * vec({7.0, -3.0});
  const double gn = g.norm();
  const double r = oracle::bisect([&](double s) { return s - gn * (1 - s * s) / 2; }, 0.0, 1.0);
  const Vec ref = g * (1 - r * r) / 2;
  CHECK((b.iterate() - ref).cwiseAbs().maxCoeff() < 1e-10);

  // dense and sparse paths agree for p != 2
  BaseLearner s(1, 0.02, 0.04, DomainSpec::lp_ball(1.6), 3), dn = s;
  RngStream rng(2);
  for (int k = 0; k < 100; ++k) {
    const int axis = static_cast<int>(rng.below(3));
    const double v = 10 * rng.normal();
    s.update_sparse(axis, v);
    Vec e = Vec::Zero(3);
    e[axis] = v;
    dn.update(e);
    CHECK((s.iterate() - dn.iterate()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(lp_norm(s.iterate(), 1.6) <= 0.96 + 1e-12);
  }
}

TEST_CASE("constant positive loss drives the iterate to the boundary") {
  const double gamma = 0.04;
  BaseLearner b(1, 0.05, gamma, DomainSpec::lp_ball(2.0), 2);
  double last = 0.0;
  for (int k = 0; k < 400; ++k) {
    b.update(vec({1.0, 0.0}));
    CHECK(b.iterate()[0] < last);
    last = b.iterate()[0];
  }
  b.update(vec({1e6, 0.0}));
  CHECK(b.iterate()[0] == doctest::Approx(-(1 - gamma)).epsilon(1e-12));
  CHECK(std::abs(b.iterate()[1]) < 1e-15);
}

TEST_CASE("gauge base learner stays in the clipped gauge ball") {
  Eigen::MatrixXd A(2, 2);
  A << 1.0, 0.15, 0.15, 1.0;
  auto oracle = std::make_shared<EllipsoidGauge>(A);
  BaseLearner b(1, 0.05, 0.1, DomainSpec::gauge(oracle, 1.5, 1.0), 2);
  RngStream rng(1);
  for (int k = 0; k < 300; ++k) {
    b.update(vec({5 * rng.normal(), 5 * rng.normal() + 2}));
    CHECK(oracle->gauge(b.iterate()) <= 0.9 + 1e-12);
    CHECK(b.norm() == doctest::Approx(oracle->gauge(b.iterate())));
  }
}

// ---------------------------------------------------------------------------
// literal per-round operations

TEST_CASE("renormalization") {
  const Vec p = Vec::Constant(10, 0.1);
  const Vec ph = renormalize(p, 4);
  CHECK((ph - Vec::Constant(4, 0.25)).cwiseAbs().maxCoeff() < 1e-15);
  const Vec q = vec({0.1, 0.3, 0.2, 0.4});
  const Vec r = renormalize(q, 2);
  CHECK(r[0] == doctest::Approx(0.25));
  CHECK(r[1] == doctest::Approx(0.75));
  CHECK((renormalize(q, 4) - q).norm() < 1e-15);
}

TEST_CASE("action sampling") {
  RngStream rng(9);
  std::vector<Vec> props{vec({0.0, 1.0, 0.0})};
  for (int k = 0; k < 100; ++k) {
    auto s = sample_action(Vec::Ones(1), props, {1}, 1.0, rng);
    CHECK(s.rho == 1);
    CHECK(s.x.cwiseAbs().sum() == 1.0);
    auto z = sample_action(Vec::Ones(1), props, {1}, 0.0, rng);
    CHECK(z.rho == 0);
    CHECK((z.x - props[0]).norm() == 0.0);
  }

  // E[x x^T] = M~ for fixed proposals
  std::vector<Vec> pr{vec({0.6, 0.8}), vec({0.0, -1.0}), vec({-1.0, 0.0})};
  const Vec ph = vec({0.5, 0.3, 0.2});
  const double beta = 0.3;
  const Mat M = build_mtilde(ph, pr, beta, 2);
  const int N = 1000000;
  Mat sum = Mat::Zero(2, 2), sq = Mat::Zero(2, 2);
  for (int k = 0; k < N; ++k) {
    const auto s = sample_action(ph, pr, {1, 0, 0}, beta, rng);
    const Mat xx = s.x * s.x.transpose();
    sum += xx;
    sq += xx.cwiseProduct(xx);
  }
  const Mat mean = sum / N;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double sd = std::sqrt(std::max(0.0, sq(i, j) / N - mean(i, j) * mean(i, j)));
      CHECK(std::abs(mean(i, j) - M(i, j)) <= 5 * sd / std::sqrt(double(N)) + 1e-15);
    }
  }
}

TEST_CASE("base loss estimator") {
  const Vec x = vec({1.0, 0.0});
  const Vec ph = Vec::Ones(1), norms = vec({0.6});
  const Vec lh = base_loss_estimator(x, 0.5, 0, 0, ph, norms, 0.0, 0.04);
  CHECK(lh[0] == doctest::Approx(2.5));
  CHECK(lh[1] == 0.0);
  CHECK(base_loss_estimator(x, 0.5, 1, 0, ph, norms, 0.0, 0.04).norm() == 0.0);
  CHECK(base_loss_estimator(x, 0.5, 0, 1, ph, norms, 0.0, 0.04).norm() == 0.0);
  CHECK_THROWS_AS(base_loss_estimator(x, 0.5, 0, 0, ph, vec({0.99}), 0.0, 0.04), InvariantViolation);
}

TEST_CASE("M~ construction") {
  const Mat m = build_mtilde(Vec::Ones(1), {vec({1.0, 0.0})}, 0.5, 2);
  CHECK(m(0, 0) == doctest::Approx(0.75));
  CHECK(m(1, 1) == doctest::Approx(0.25));
  CHECK(m(0, 1) == 0.0);
  const Mat e = build_mtilde(Vec::Ones(1), {vec({0.3, 0.4})}, 1.0, 2);
  CHECK((e - 0.5 * Mat::Identity(2, 2)).norm() < 1e-15);

  RngStream rng(3);
  for (int k = 0; k < 50; ++k) {
    const int t = 1 + static_cast<int>(rng.below(6));
    std::vector<Vec> pr;
    Vec ph(t);
    for (int i = 0; i < t; ++i) {
      Vec a(3);
      for (int j = 0; j < 3; ++j) a[j] = rng.normal();
      pr.push_back(a / a.norm());
      ph[i] = rng.uniform() + 0.01;
    }
    ph /= ph.sum();
    const double beta = 0.05 + 0.4 * rng.uniform();
    Eigen::SelfAdjointEigenSolver<Mat> es(build_mtilde(ph, pr, beta, 3));
    CHECK(es.eigenvalues().minCoeff() >= beta / 3 - 1e-12);
  }
}

TEST_CASE("bias terms") {
  // lambda T (1 - beta) = 1 with T = 10, beta = 0, lambda = 0.1
  const Vec b = bias_terms(vec({0.5, 0.5}), vec({0.9, 0.5}), 0.1, 0.0, 10, 0.04);
  CHECK(b[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(b[1] == doctest::Approx(5.0 / 3.0).epsilon(1e-14));

  const Vec eq = bias_terms(vec({0.2, 0.8}), vec({0.4, 0.4}), 0.01, 0.3, 100, 0.04);
  const double ref = 1.0 / (0.01 * 100 * 0.7);
  CHECK(eq[0] == doctest::Approx(ref));
  CHECK(eq[1] == doctest::Approx(ref));

  RngStream rng(5);
  for (int k = 0; k < 100; ++k) {
    Vec ph(4), nr(4);
    for (int i = 0; i < 4; ++i) {
      ph[i] = rng.uniform() + 1e-3;
      nr[i] = 0.9 * rng.uniform();
    }
    ph /= ph.sum();
    const Vec bb = bias_terms(ph, nr, 0.002, 0.25, 1000, 0.04);
    CHECK(std::abs(ph.dot(bb) - 1.0 / (0.002 * 1000 * 0.75)) < 1e-10);
  }
}

TEST_CASE("fixed share") {
  const Vec p = vec({0.1, 0.2, 0.3, 0.4});
  const Vec same = fixed_share_update(p, Vec::Zero(4), 0.5, 0.1);
  CHECK((same - (0.9 * p + Vec::Constant(4, 0.025))).cwiseAbs().maxCoeff() < 1e-15);
  const Vec two = fixed_share_update(vec({0.5, 0.5}), vec({0.0, std::log(4.0)}), 1.0, 0.0);
  CHECK(two[0] == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(two[1] == doctest::Approx(0.2).epsilon(1e-14));
  const Vec uni = fixed_share_update(p, vec({1, -3, 8, 0}), 2.0, 1.0);
  CHECK((uni - Vec::Constant(4, 0.25)).cwiseAbs().maxCoeff() < 1e-15);
  // huge losses do not overflow
  const Vec big = fixed_share_update(vec({0.5, 0.5}), vec({1e5, 1e5 + 1}), 1.0, 0.0);
  CHECK(std::isfinite(big[0]));
  CHECK(big.sum() == doctest::Approx(1.0));
}

// ---------------------------------------------------------------------------
// the learner

TEST_CASE("compact learner matches the literal operations") {
  for (double p : {2.0, 1.5}) {
    const int T = 12, d = 3;
    CorralParams cp = derive_params(p, d, 10000, 1);
    cp.T = T;
    cp.mu = 1.0 / T;
    cp.epsilon = 0.05;
    CorralLearner learner(cp, DomainSpec::lp_ball(p));
    RngStream rng(17), env(18);
    Vec full_p = Vec::Constant(T, 1.0 / T);
    for (int t = 1; t <= T; ++t) {
      Vec loss(d);
      for (int i = 0; i < d; ++i) loss[i] = env.normal();
      loss /= lp_norm(loss, dual_exponent(p));

      const Vec& x = learner.select(rng);
      const RoundDraw dr = learner.last_draw();
      const double realized = loss.dot(x);

      // literal computation from the pre-round state
      const Vec ph = renormalize(full_p, t);
      std::vector<Vec> props;
      Vec norms(t);
      for (int i = 0; i < t; ++i) {
        const BaseLearner& b = learner.base(i);
        props.push_back(b.proposal_vector(dr.proposals[i]));
        norms[i] = b.norm();
      }
      CHECK((learner.weights() - full_p).cwiseAbs().maxCoeff() < 1e-15);
      const int xi = dr.rho == 0 ? dr.played.xi : 0;
      const Vec lh = base_loss_estimator(x, realized, dr.rho, xi, ph, norms, cp.beta, cp.gamma);
      const Mat M = build_mtilde(ph, props, cp.beta, d);
      const Vec b = bias_terms(ph, norms, cp.lambda, cp.beta, T, cp.gamma);
      const auto est = meta_loss_estimator(M, x, realized, props, ph, b, T);
      std::vector<BaseLearner> bases;
      for (int i = 0; i < t; ++i) bases.push_back(learner.base(i));

      learner.observe(realized);
      full_p = fixed_share_update(full_p, est.c_hat, cp.epsilon, cp.mu);

      CHECK((learner.last_mtilde() - M).cwiseAbs().maxCoeff() < 1e-14);
      CHECK((learner.last_ell_bar() - est.ell_bar).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((learner.last_bias() - b).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((learner.last_c_hat() - est.c_hat.head(t)).cwiseAbs().maxCoeff() < 1e-10);
      if (t < T) CHECK(std::abs(learner.last_c_hat_pad() - est.c_hat[T - 1]) < 1e-10);
      CHECK((learner.weights() - full_p).cwiseAbs().maxCoeff() < 1e-13);
      for (int i = 0; i < t; ++i) {
        bases[i].update(lh);
        CHECK((learner.base(i).iterate() - bases[i].iterate()).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("padding identity with pre-update weights") {
  RngStream rng(2);
  const int T = 9, t = 4;
  Vec p(T);
  for (int i = 0; i < T; ++i) p[i] = rng.uniform() + 0.1;
  p /= p.sum();
  const Vec ph = renormalize(p, t);
  std::vector<Vec> props;
  for (int i = 0; i < t; ++i) props.push_back(Vec::Unit(2, i % 2));
  const Mat M = build_mtilde(ph, props, 0.2, 2);
  const auto est = meta_loss_estimator(M, props[1], 0.3, props, ph, Vec::Constant(t, 0.1), T);
  CHECK(std::abs(p.dot(est.c_hat) - ph.dot(est.c_hat.head(t))) < 1e-12);
}

TEST_CASE("one-dimensional estimator is exact") {
  CorralParams cp = derive_params(2.0, 1, 2000, 1);
  CorralLearner learner(cp, DomainSpec::lp_ball(2.0));
  RngStream rng(6);
  for (int t = 0; t < 200; ++t) {
    const double l = (t % 7 < 3) ? 0.8 : -0.4;
    const Vec& x = learner.select(rng);
    learner.observe(l * x[0]);
    CHECK(learner.last_ell_bar()[0] == doctest::Approx(l).epsilon(1e-12));
  }
}

TEST_CASE("single-slot learner runs one round") {
  CorralParams cp;
  cp.p = 2.0;
  cp.d = 2;
  cp.T = 1;
  cp.S = 1;
  cp.gamma = 0.5;
  cp.eta = 0.1;
  cp.epsilon = 0.01;
  cp.beta = 0.1;
  cp.lambda = 0.1;
  cp.mu = 1.0;
  CorralLearner learner(cp, DomainSpec::lp_ball(2.0));
  learner.enable_invariant_checks(true);
  RngStream rng(1);
  learner.round([](const Vec& x) { return 0.3 * x[0]; }, rng);
  CHECK(learner.renormalized()[0] == 1.0);
  CHECK(learner.invariants().violations == 0);
  CHECK(learner.invariants().checks > 0);
  CHECK_THROWS_AS(learner.select(rng), ContractViolation);
}

TEST_CASE("learner replay is bit identical") {
  auto run = [] {
    CorralLearner learner(derive_params(2.0, 2, 50, 1), DomainSpec::lp_ball(2.0));
    RngStream rng(99);
    std::vector<double> trace;
    for (int t = 0; t < 50; ++t) {
      const Vec& x = learner.select(rng);
      trace.push_back(x[0]);
      trace.push_back(x[1]);
      learner.observe(0.6 * x[0] - 0.8 * x[1]);
      const Vec w = learner.weights();
      trace.insert(trace.end(), w.data(), w.data() + w.size());
    }
    return trace;
  };
  CHECK(run() == run());
}

TEST_CASE("invariants hold over a long run") {
  for (double p : {2.0, 1.5}) {
    CorralLearner learner(derive_params(p, 3, 3000, 3), DomainSpec::lp_ball(p));
    learner.enable_invariant_checks(true);
    RngStream rng(4), env(5);
    Vec g(3);
    for (int t = 0; t < 3000; ++t) {
      if (t % 1000 == 0) {
        for (int i = 0; i < 3; ++i) g[i] = env.normal();
        g /= lp_norm(g, dual_exponent(p));
      }
      const Vec& x = learner.select(rng);
      learner.observe(g.dot(x));
    }
    CHECK(learner.invariants().violations == 0);
    for (const auto& m : learner.invariants().messages) MESSAGE(m);
  }
}

TEST_CASE("call order contract") {
  CorralLearner learner(derive_params(2.0, 2, 100, 1), DomainSpec::lp_ball(2.0));
  RngStream rng(1);
  CHECK_THROWS_AS(learner.observe(0.0), ContractViolation);
  learner.select(rng);
  CHECK_THROWS_AS(learner.select(rng), ContractViolation);
  CHECK_THROWS_AS(learner.observe(std::nan("")), NumericalError);
}
