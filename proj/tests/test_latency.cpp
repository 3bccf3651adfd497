#include "curefit/latency.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace curefit;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

CureDataset make(std::initializer_list<double> times, std::initializer_list<int> events, const MatrixXd& z) {
  const auto n = static_cast<Eigen::Index>(times.size());
  VectorXd t(n);
  Eigen::VectorXi e(n);
  Eigen::Index i = 0;
  for (double v : times) t(i++) = v;
  i = 0;
  for (int v : events) e(i++) = v;
  return CureDataset(t, e, MatrixXd::Ones(n, 1), z);
}

double max_rel(const MatrixXd& a, const MatrixXd& b) {
  return ((a - b).cwiseAbs().array() / b.cwiseAbs().array().max(1e-8)).maxCoeff();
}

}  // namespace

TEST_CASE("Breslow hazard by hand") {
  const auto data = make({1, 2, 3}, {1, 1, 1}, MatrixXd::Zero(3, 1));
  const auto h = breslow_hazard(VectorXd::Zero(1).eval(), VectorXd::Ones(3).eval(), data);
  REQUIRE(h.jumps.size() == 3);
  CHECK(h.jumps(0) == doctest::Approx(1.0 / 3));
  CHECK(h.jumps(1) == doctest::Approx(1.0 / 2));
  CHECK(h.jumps(2) == doctest::Approx(1.0));
  CHECK(h.cumulative(1) == doctest::Approx(5.0 / 6));
  CHECK(h.cumulative(2) == doctest::Approx(11.0 / 6));
  CHECK(h.cumulative_at(0.5) == 0.0);
  CHECK(h.cumulative_at(2.5) == doctest::Approx(5.0 / 6));
  CHECK(h.jump_at(2.0) == doctest::Approx(0.5));
  CHECK(h.jump_at(2.5) == 0.0);
}

TEST_CASE("Breslow hazard properties") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    const auto data = oracle::random_dataset(rng, 10 + rep * 3, 2, 1);
    const VectorXd beta(Eigen::Vector2d(0.4 - 0.1 * rep, -0.3));

    // gamma = 1 reduces to the classical estimator.
    const auto h = breslow_hazard(beta, VectorXd::Ones(data.size()).eval(), data);
    const auto ref = oracle::classical_breslow(data, beta);
    REQUIRE(static_cast<std::size_t>(h.jumps.size()) == ref.times.size());
    for (std::size_t k = 0; k < ref.times.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      CHECK(h.jump_times(kk) == ref.times[k]);
      CHECK(std::abs(h.jumps(kk) - ref.jumps[k]) < 1e-12);
    }

    // Weighted: jumps are event counts over the weighted risk sum; only at event times.
    const VectorXd gamma = oracle::random_weights(rng, data, true);
    const auto hw = breslow_hazard(beta, gamma, data);
    for (Eigen::Index k = 0; k < hw.jumps.size(); ++k) {
      const double t = hw.jump_times(k);
      double d = 0, risk = 0;
      for (Eigen::Index l = 0; l < data.size(); ++l) {
        if (data.event()(l) == 1 && data.time()(l) == t) d += 1;
        if (data.time()(l) >= t) risk += gamma(l) * std::exp(data.z().row(l).dot(beta));
      }
      CHECK(d > 0);
      CHECK(std::abs(hw.jumps(k) - d / risk) < 1e-12);
      if (k > 0) CHECK(hw.cumulative(k) >= hw.cumulative(k - 1));
    }

    // Halving every weight doubles every jump.
    const auto half = breslow_hazard(beta, VectorXd(gamma / 2), data);
    CHECK(half.jumps == VectorXd(2 * hw.jumps));
  }
}

TEST_CASE("zero weight over a whole risk set is degenerate") {
  const auto data = make({1, 2}, {1, 1}, MatrixXd::Zero(2, 1));
  CHECK_THROWS_AS(breslow_hazard(VectorXd::Zero(1).eval(), VectorXd(Eigen::Vector2d(1, 0)), data),
                  DegenerateRiskSetError);
}

TEST_CASE("conditional survival") {
  const auto data = make({1, 2, 3}, {1, 1, 0}, MatrixXd::Zero(3, 1));
  const auto h = breslow_hazard(VectorXd::Zero(1).eval(), VectorXd::Ones(3).eval(), data);
  const VectorXd beta = VectorXd::Constant(1, 0.7);
  const VectorXd z = VectorXd::Constant(1, 0.5);
  CHECK(conditional_survival(0.5, z, beta, h) == 1.0);
  CHECK(conditional_survival(10.0, z, beta, h) == doctest::Approx(std::exp(-h.cumulative(1) * std::exp(0.35))));
  CHECK(conditional_survival(10.0, z, beta, h) == conditional_survival(2.0, z, beta, h));

  BaselineHazard<double> ln2;
  ln2.jump_times = VectorXd::Constant(1, 1.0);
  ln2.jumps = VectorXd::Constant(1, std::log(2.0));
  ln2.cumulative = ln2.jumps;
  CHECK(conditional_survival(1.0, VectorXd::Zero(1).eval(), beta, ln2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(conditional_survival(1.0, VectorXd::Zero(2).eval(), beta, ln2), DimensionError);
}

TEST_CASE("profile log-likelihood") {
  SUBCASE("single subject closed form") {
    MatrixXd z(1, 1);
    z << 1.7;
    const auto one = make({1}, {1}, z);
    for (double b : {-2.0, 0.0, 0.9})
      CHECK(profile_loglik(VectorXd::Constant(1, b).eval(), VectorXd::Ones(1).eval(), one) ==
            doctest::Approx(-1.0).epsilon(1e-14));
  }
  SUBCASE("term-by-term oracle") {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 10; ++rep) {
      const auto data = oracle::random_dataset(rng, 10, 2, 0);
      const VectorXd beta(Eigen::Vector2d(0.3, -0.8 + 0.1 * rep));
      for (bool unit : {true, false}) {
        const VectorXd gamma = unit ? VectorXd::Ones(10).eval() : oracle::random_weights(rng, data, true);
        CHECK(std::abs(profile_loglik(beta, gamma, data) - oracle::profile_loglik_direct(data, beta, gamma)) < 1e-10);
      }
      // gamma = 1: Breslow partial likelihood minus the event count plus the tie-share logs.
      double ties = 0;
      for (Eigen::Index i = 0; i < 10; ++i) {
        if (data.event()(i) != 1) continue;
        double d = 0;
        for (Eigen::Index k = 0; k < 10; ++k) d += data.event()(k) == 1 && data.time()(k) == data.time()(i);
        ties += std::log(d);
      }
      CHECK(std::abs(profile_loglik(beta, VectorXd::Ones(10).eval(), data) -
                     (oracle::cox_partial(data, beta) + ties - data.event_count())) < 1e-10);
    }
  }
}

TEST_CASE("profile score") {
  SUBCASE("single subject is zero") {
    MatrixXd z(1, 2);
    z << 0.3, -1.1;
    const auto one = make({2}, {1}, z);
    CHECK(profile_score(VectorXd(Eigen::Vector2d(0.5, 0.2)), VectorXd::Ones(1).eval(), one).cwiseAbs().maxCoeff() <
          1e-15);
  }
  SUBCASE("column sums match finite differences") {
    std::mt19937_64 rng(41);
    for (int rep = 0; rep < 10; ++rep) {
      const auto data = oracle::random_dataset(rng, 10, 2, 0);
      const VectorXd gamma = oracle::random_weights(rng, data, true);
      const VectorXd beta(Eigen::Vector2d(0.2, -0.5));
      const VectorXd analytic = profile_score(beta, gamma, data).colwise().sum().transpose();
      const VectorXd fd = oracle::numeric_gradient(
          [&](const VectorXd& b) { return profile_loglik(b, gamma, data); }, beta, 1e-6);
      CHECK(max_rel(analytic, fd) < 1e-5);
    }
  }
  SUBCASE("plug-in form agrees row by row") {
    std::mt19937_64 rng(43);
    for (int rep = 0; rep < 10; ++rep) {
      const auto data = oracle::random_dataset(rng, 25, 3, 0);
      const VectorXd gamma = oracle::random_weights(rng, data, true);
      const VectorXd beta(Eigen::Vector3d(0.2, -0.5, 0.1));
      CHECK((profile_score(beta, gamma, data) - efficient_score_plugin(beta, gamma, data)).cwiseAbs().maxCoeff() <
            1e-10);
    }
  }
  SUBCASE("unit weights give classical Cox score residuals") {
    std::mt19937_64 rng(47);
    const auto data = oracle::random_dataset(rng, 20, 2, 0);
    const VectorXd beta(Eigen::Vector2d(-0.3, 0.6));
    CHECK((profile_score(beta, VectorXd::Ones(20).eval(), data) - oracle::cox_score_residuals(data, beta))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("latency M-step") {
  SUBCASE("unit weights reproduce the Cox partial-likelihood MLE") {
    std::mt19937_64 rng(51);
    for (int rep = 0; rep < 5; ++rep) {
      const auto data = oracle::random_dataset(rng, 30, 2, 0);
      const auto state = fit_latency(VectorXd::Ones(30).eval(), data, VectorXd::Zero(2).eval());
      const VectorXd ref = oracle::cox_fit(data);
      CHECK(sup_norm(state.beta - ref) < 1e-6);
      const auto lam = oracle::classical_breslow(data, ref);
      for (std::size_t k = 0; k < lam.jumps.size(); ++k)
        CHECK(std::abs(state.hazard.jumps(static_cast<Eigen::Index>(k)) - lam.jumps[k]) < 1e-6);
    }
  }
  SUBCASE("maximizer beats random perturbations") {
    std::mt19937_64 rng(53);
    const auto data = oracle::random_dataset(rng, 40, 2, 0);
    const VectorXd gamma = oracle::random_weights(rng, data, true);
    const auto state = fit_latency(gamma, data, VectorXd::Zero(2).eval());
    const double best = profile_loglik(state.beta, gamma, data);
    std::normal_distribution<double> gauss;
    for (int k = 0; k < 100; ++k) {
      VectorXd dir(2);
      dir << gauss(rng), gauss(rng);
      CHECK(profile_loglik(VectorXd(state.beta + 0.1 * dir.normalized()), gamma, data) <= best);
    }
    CHECK(sup_norm(profile_score(state.beta, gamma, data).colwise().sum()) / 40 <= 1e-7);
  }
  SUBCASE("symmetric groups give zero") {
    MatrixXd z(6, 1);
    z << 0, 0, 0, 1, 1, 1;
    const auto data = make({1, 2, 3, 1, 2, 3}, {1, 1, 0, 1, 1, 0}, z);
    const auto state = fit_latency(VectorXd::Ones(6).eval(), data, VectorXd::Constant(1, 0.8).eval());
    CHECK(std::abs(state.beta(0)) < 1e-8);
  }
}
