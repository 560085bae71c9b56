#include <doctest.h>

#include "pfstab/certificate.hpp"
#include "pfstab/error.hpp"
#include "pfstab/policy.hpp"
#include "support.hpp"

using namespace pfstab;
using namespace pfstab::testing;

namespace {

LPSolution optimal_with_theta(std::vector<std::vector<double>> theta) {
    LPSolution s;
    s.status = LPStatus::Optimal;
    s.theta = std::move(theta);
    s.value.assign(s.theta.front().size(), 0.0);
    return s;
}

}  // namespace

TEST_CASE("tiny optimum extracts policy (2,2) with mu = (6,4)") {
    const auto e = tiny_ensemble();
    const auto s = solve_lp(assemble_lp(e, 1.0));
    const Policy p = extract_policy(s, e);
    CHECK(p.action == std::vector<std::size_t>{1, 1});
    const SparseMatrix pu = closed_loop_matrix(p, e);
    CHECK(pu == e.restricted[1]);
    const auto cm = lyapunov_measure(pu, e.mass, 1.0);
    REQUIRE(cm.certificate.certified);
    REQUIRE(cm.measure);
    CHECK(cm.measure->mu[0] == doctest::Approx(6.0));
    CHECK(cm.measure->mu[1] == doctest::Approx(4.0));
    CHECK(cm.certificate.spectral_radius == doctest::Approx((0.5 + std::sqrt(1.25)) / 2.0).epsilon(1e-8));
    // Occupation identity: mu equals sum_a theta^a.
    for (std::size_t j = 0; j < 2; ++j) CHECK(cm.measure->mu[j] == doctest::Approx(s.theta[0][j] + s.theta[1][j]));
}

TEST_CASE("min-index rule and positivity threshold") {
    const auto e = tiny_ensemble();
    CHECK(extract_policy(optimal_with_theta({{0.3, 0.0}, {0.7, 4.0}}), e).action == std::vector<std::size_t>{0, 1});
    CHECK(extract_policy(optimal_with_theta({{1e-12, 0.0}, {6.0, 4.0}}), e).action == std::vector<std::size_t>{1, 1});
    CHECK_THROWS_AS(extract_policy(optimal_with_theta({{1.0, 0.0}, {6.0, 0.0}}), e), Error);
    LPSolution bad;
    CHECK_THROWS_AS(extract_policy(bad, e), Error);
}

TEST_CASE("mixed policy rows come from the selected actions") {
    const auto e = tiny_ensemble();
    Policy p{{0, 1}, {{0.0}, {1.0}}, {}};
    const SparseMatrix pu = closed_loop_matrix(p, e);
    CHECK(pu.at(0, 1) == 0.5);
    CHECK(pu.at(0, 0) == 0.0);
    CHECK(pu.at(1, 0) == 0.5);
    CHECK(pu.at(1, 1) == 0.0);
}

TEST_CASE("policy evaluation: optimal value and a suboptimal policy") {
    const auto e = tiny_ensemble();
    const auto ev = evaluate_policy(Policy{{1, 1}, {{0.0}, {1.0}}, {}}, e, 1.0);
    REQUIRE(ev.proper);
    CHECK(ev.value[0] == doctest::Approx(1.2));
    CHECK(ev.value[1] == doctest::Approx(0.8));
    CHECK(ev.objective == doctest::Approx(2.0));
    const auto sub = evaluate_policy(Policy{{0, 0}, {{0.0}, {1.0}}, {}}, e, 1.0);
    REQUIRE(sub.proper);
    CHECK(sub.value[0] == doctest::Approx(1.5));
    CHECK(sub.value[1] == doctest::Approx(1.0));
    CHECK(sub.objective == doctest::Approx(2.5));
    CHECK(sub.objective >= ev.objective);
}

TEST_CASE("evaluate_policy reproduces the LP objective on random instances") {
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        const auto e = random_ensemble(seed, 1 + seed % 4, 1 + seed % 3);
        const auto s = solve_lp(assemble_lp(e, 1.0));
        if (s.status != LPStatus::Optimal) continue;
        const auto ev = evaluate_policy(extract_policy(s, e), e, 1.0);
        REQUIRE(ev.proper);
        CHECK(close_rel(ev.objective, s.primal_objective, 1e-6));
        for (std::size_t j = 0; j < s.value.size(); ++j) CHECK(close_rel(ev.value[j], s.value[j], 1e-6));
    }
}

TEST_CASE("zero closed loop: mu = m") {
    const std::vector<double> m{1.0, 2.0, 0.5};
    const auto cm = lyapunov_measure(SparseMatrix(3, 3), m, 1.05);
    REQUIRE(cm.certificate.certified);
    CHECK(cm.measure->mu == m);
    CHECK(cm.certificate.spectral_radius == 0.0);
}

TEST_CASE("gamma beyond the decay rate is not certified") {
    const auto e = tiny_ensemble();
    const auto cm = lyapunov_measure(e.restricted[1], e.mass, 1.3);
    CHECK_FALSE(cm.certificate.certified);
    CHECK_FALSE(cm.measure);
    CHECK(cm.certificate.spectral_radius > 1.0);
    CHECK(!cm.certificate.reason.empty());
    CHECK(cm.certificate.dominant_support == std::vector<std::size_t>{0, 1});
    CHECK_FALSE(evaluate_policy(Policy{{1, 1}, {{0.0}, {1.0}}, {}}, e, 1.3).proper);
}

TEST_CASE("a closed recurrent class is not certified") {
    auto p = SparseMatrix::from_rows(3, {{{1, 1.0}}, {{0, 1.0}}, {{2, 0.5}}});
    const auto cm = verify_stability(p, std::vector<double>{1.0, 0.0, 1.0}, 1.0);
    CHECK_FALSE(cm.certificate.certified);
    CHECK(cm.certificate.spectral_radius == doctest::Approx(1.0));
}

TEST_CASE("unreachable recurrent states do not block the certificate") {
    // State 2 is a closed loop but carries no mass and is not reachable.
    auto p = SparseMatrix::from_rows(3, {{{1, 0.5}}, {}, {{2, 1.0}}});
    const auto cm = verify_stability(p, std::vector<double>{1.0, 1.0, 0.0}, 1.0);
    REQUIRE(cm.certificate.certified);
    CHECK(cm.certificate.reachable == std::vector<std::size_t>{0, 1});
    CHECK(cm.measure->mu[0] == doctest::Approx(1.0));
    CHECK(cm.measure->mu[1] == doctest::Approx(1.5));
    CHECK(cm.measure->mu[2] == 0.0);
}

TEST_CASE("reachability follows positive entries from the mass support") {
    auto p = SparseMatrix::from_rows(4, {{{1, 0.5}}, {{2, 0.5}}, {}, {{0, 1.0}}});
    CHECK(reachable_states(p, std::vector<double>{1.0, 0.0, 0.0, 0.0}) == std::vector<std::size_t>{0, 1, 2});
    CHECK(reachable_states(p, std::vector<double>{0.0, 0.0, 0.0, 1.0}) == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("power iteration handles periodic chains") {
    auto p = SparseMatrix::from_rows(2, {{{1, 0.9}}, {{0, 0.9}}});
    const std::vector<std::size_t> all{0, 1};
    const auto est = spectral_radius(p, all);
    CHECK(est.converged);
    CHECK(est.radius == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("certificate soundness and Neumann convergence on random chains") {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        const auto e = random_ensemble(seed, 2 + seed % 5, 1, 0.0);
        const auto& p = e.restricted[0];
        for (double gamma : {1.0, 1.05}) {
            const auto cm = verify_stability(p, e.mass, gamma);
            if (!cm.certificate.certified) continue;
            const auto& mu = cm.measure->mu;
            CHECK(cm.certificate.spectral_radius < 1.0);
            CHECK(cm.measure->residual <= 1e-9 * (1.0 + 1.5));
            for (std::size_t j = 0; j < mu.size(); ++j) CHECK(mu[j] >= e.mass[j] - 1e-12);
            CHECK(cm.measure->neumann_monotone);
            CHECK(cm.measure->neumann_terms == 200);
            const double decay = std::pow(cm.certificate.spectral_radius, 200);
            if (decay < 1e-6) CHECK(cm.measure->neumann_gap <= 1e-4);
        }
    }
}

TEST_CASE("local controller saturates to the control range") {
    Policy p{{0}, {{-80.0}, {80.0}}, {-188.4, -45.2}};
    CHECK(p.local_control(std::vector<double>{0.1, 0.0})[0] == doctest::Approx(18.84));
    CHECK(p.local_control(std::vector<double>{1.0, 0.0})[0] == 80.0);
    CHECK(p.local_control(std::vector<double>{-1.0, 0.0})[0] == -80.0);
    Policy zero{{0}, {{-80.0}, {80.0}}, {}};
    CHECK(zero.local_control(std::vector<double>{1.0, 2.0})[0] == 0.0);
}
