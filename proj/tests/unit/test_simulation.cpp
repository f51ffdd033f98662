#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <random>

#include "biaslogit/certificates.hpp"
#include "biaslogit/dynamics.hpp"
#include "biaslogit/simulation.hpp"
#include "../support/oracles.hpp"

using namespace biaslogit;
using doctest::Approx;

namespace {

Scenario constant_cost(Vector T, Vector pi0, double eta = 1.0, double beta = 1.0) {
    Scenario s;
    s.logit = {eta, beta, T.size()};
    s.actual_cost.offset = std::move(T);
    s.pi0 = std::move(pi0);
    return s;
}

Scenario pi_additive(Vector pi0, double kappa = 2.0) {
    Scenario s;
    s.logit = {1.0, 1.0, 3};
    s.bias = AdditiveBias::uniform(3, BiasCurve::affine(0.5, 1.0));
    s.mechanism = MechanismKind::pi;
    s.gains = {1.0, kappa, 1.0, 1.0};
    s.pi0 = std::move(pi0);
    s.target = {0.2, 0.3, 0.5};
    s.horizon = 200.0;
    return s;
}

Scenario saturated(Vector pi0) {
    Scenario s;
    s.logit = {1.0, 1.0, 3};
    s.bias = MultiplicativeBias::uniform(3, BiasCurve::affine(1.05, 0.05));
    s.mechanism = MechanismKind::saturated;
    s.gains = {1.0, 1.0, 1.0, 1.0};
    s.pi0 = std::move(pi0);
    s.target = {0.2, 0.3, 0.5};
    s.horizon = 100.0;
    return s;
}

double analytic_error(const TrajectoryRecord& traj, const Vector& q, const Vector& pi0, double eta) {
    const auto& last = traj.samples.back();
    double err = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
        const double exact = q[k] + std::exp(-eta * last.t) * (pi0[k] - q[k]);
        err = std::max(err, std::abs(last.pi[k] - exact));
    }
    return err;
}

}  // namespace

TEST_CASE("cost signal values and derivatives") {
    CostSignal c;
    c.offset = {1.0, 2.0};
    c.waves = {{{0.5, 2.0, 0.1}}, {{0.2, 1.0, 0.0}, {0.3, 3.0, 1.0}}};
    Vector v(2), d(2);
    c.value(0.7, v);
    c.derivative(0.7, d);
    CHECK(v[0] == Approx(1.0 + 0.5 * std::sin(1.4 + 0.1)));
    CHECK(v[1] == Approx(2.0 + 0.2 * std::sin(0.7) + 0.3 * std::sin(2.1 + 1.0)));
    CHECK(d[0] == Approx(0.5 * 2.0 * std::cos(1.5)));
    CHECK(d[1] == Approx(0.2 * std::cos(0.7) + 0.9 * std::cos(3.1)));
    CHECK(c.upper_bound() == Approx(2.5));
}

TEST_CASE("unbiased constant cost relaxes along the analytic solution") {
    const Vector T{0.3, -0.1, 0.5};
    const Vector pi0{0.7, 0.2, 0.1};
    for (double eta : {0.5, 1.0, 2.0}) {
        auto s = constant_cost(T, pi0, eta);
        s.step = 1e-3 / eta;
        s.record_interval = 0.1 / eta;
        s.horizon = 20.0 / eta;
        const auto traj = run(s);
        const auto q = oracle::softmax_plain(T, 1.0);
        CHECK(distance(traj.samples.back().pi, q) < 1e-6);
        for (const auto& x : traj.samples) {
            for (std::size_t k = 0; k < 3; ++k) {
                const double exact = q[k] + std::exp(-eta * x.t) * (pi0[k] - q[k]);
                CHECK(std::abs(x.pi[k] - exact) < 1e-12);
            }
        }
        CHECK(oracle::structural_invariants(traj).ok);
    }
}

TEST_CASE("RK4 global error shrinks sixteenfold when the step halves") {
    const Vector T{0.3, -0.1, 0.5};
    const Vector pi0{0.7, 0.2, 0.1};
    const auto q = oracle::softmax_plain(T, 1.0);
    auto error_at = [&](double h) {
        auto s = constant_cost(T, pi0);
        s.step = h;
        s.record_interval = 0.4;
        s.horizon = 10.0;
        return analytic_error(run(s), q, pi0, 1.0);
    };
    const double e1 = error_at(0.4), e2 = error_at(0.2), e3 = error_at(0.1);
    MESSAGE("errors " << e1 << " " << e2 << " " << e3);
    CHECK(e1 / e2 >= 12.0);
    CHECK(e1 / e2 <= 20.0);
    CHECK(e2 / e3 >= 12.0);
    CHECK(e2 / e3 <= 20.0);
}

TEST_CASE("record layout") {
    auto s = constant_cost({0, 0}, {0.6, 0.4});
    s.horizon = 5.0;
    s.record_interval = 0.25;
    const auto traj = run(s);
    CHECK(traj.samples.size() == 21);
    CHECK(traj.samples.back().t == Approx(5.0));
    for (std::size_t i = 1; i < traj.samples.size(); ++i) CHECK(traj.samples[i].t > traj.samples[i - 1].t);
    for (const auto& x : traj.samples) {
        CHECK(x.V == x.S + x.aux);
        CHECK(x.S == Approx(storage_closed_form(CostVector{x.tau}, PopulationState{x.pi}, s.logit).value));
    }
    s.record_interval = 0.3;  // does not divide the horizon
    CHECK_THROWS_AS(run(s), std::invalid_argument);
    s.record_interval = 0.25;
    s.step = 0.0007;  // does not divide the record interval
    CHECK_THROWS_AS(run(s), std::invalid_argument);
}

TEST_CASE("scenario validation") {
    auto s = pi_additive({0.6, 0.3, 0.1});
    s.pi0 = {1.0 - 1e-7, 5e-8, 5e-8};
    CHECK_THROWS_AS(run(s), std::invalid_argument);
    s.pi0 = {0.5, 0.3, 0.1};
    CHECK_THROWS_AS(run(s), std::invalid_argument);
    auto m = saturated({0.6, 0.3, 0.1});
    m.mu0 = {0.1, 0.0, 0.0};
    CHECK_THROWS_AS(run(m), std::invalid_argument);
    m.mu0 = {};
    m.gains.alpha = 0.4;
    CHECK_THROWS_AS(run(m), std::invalid_argument);
}

TEST_CASE("uniform target with identical curves is an equilibrium") {
    auto s = pi_additive({1.0 / 3, 1.0 / 3, 1.0 / 3});
    s.target = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    s.horizon = 20.0;
    const auto traj = run(s);
    for (const auto& x : traj.samples) CHECK(distance(x.pi, s.target) < 1e-14);
    const auto c = detect_convergence(traj, 1e-4, 10.0);
    CHECK(c.converged);
    CHECK(c.time == 0.0);
}

TEST_CASE("PI mechanism with compliant gain reaches the target") {
    const auto traj = run(pi_additive({0.6, 0.3, 0.1}));
    CHECK(distance(traj.samples.back().pi, Vector{0.2, 0.3, 0.5}) < 1e-4);
    const auto c = detect_convergence(traj, 1e-4, 10.0);
    CHECK(c.converged);
    CHECK(c.time < 200.0);
    const auto check = oracle::structural_invariants(traj);
    CHECK_MESSAGE(check.ok, check.what);
}

TEST_CASE("saturated mechanism keeps its bounds and converges") {
    std::mt19937_64 rng(99);
    for (int seed = 0; seed < 3; ++seed) {
        auto s = saturated(oracle::random_interior(rng, 3, 0.05));
        s.horizon = 200.0;
        const auto traj = run(s);
        const auto check = oracle::structural_invariants(traj);
        CHECK_MESSAGE(check.ok, check.what);
        CHECK(detect_convergence(traj, 1e-3, 10.0).converged);
        CHECK(traj.max_cost < 2.0);
    }
}

TEST_CASE("biased run without a mechanism does not reach an arbitrary target") {
    Scenario s;
    s.logit = {1.0, 1.0, 3};
    s.bias = AdditiveBias::uniform(3, BiasCurve::affine(0.5, 1.0));
    s.pi0 = {0.6, 0.3, 0.1};
    s.target = {0.2, 0.3, 0.5};
    s.horizon = 50.0;
    const auto traj = run(s);
    CHECK_FALSE(detect_convergence(traj, 1e-4, 10.0).converged);
}

TEST_CASE("runs are bit-identical") {
    const auto a = run(saturated({0.6, 0.3, 0.1}));
    const auto b = run(saturated({0.6, 0.3, 0.1}));
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(std::memcmp(a.samples[i].pi.data(), b.samples[i].pi.data(), 3 * sizeof(double)) == 0);
        CHECK(std::memcmp(a.samples[i].mu.data(), b.samples[i].mu.data(), 3 * sizeof(double)) == 0);
        CHECK(std::memcmp(&a.samples[i].V, &b.samples[i].V, sizeof(double)) == 0);
    }
}

TEST_CASE("simplex drift stays below tolerance over a long horizon") {
    Scenario s;
    s.logit = {1.0, 1.0, 3};
    s.actual_cost.offset = {0.0, 0.5, 1.0};
    s.actual_cost.waves = {{{0.8, 1.3, 0.0}}, {{0.5, 0.7, 1.0}}, {{0.3, 2.1, 2.0}}};
    s.pi0 = {0.6, 0.3, 0.1};
    s.horizon = 500.0;
    s.record_interval = 1.0;
    const auto traj = run(s);
    CHECK(traj.max_simplex_drift < 1e-7);
    CHECK(oracle::structural_invariants(traj).ok);
}

TEST_CASE("unstable step aborts with a partial record") {
    auto s = constant_cost({0.0, 3.0, -2.0}, {0.4, 0.3, 0.3}, 5000.0);
    s.step = 1e-3;
    s.record_interval = 0.1;
    s.horizon = 10.0;
    try {
        run(s);
        FAIL("expected an abort");
    } catch (const RunAborted& e) {
        CHECK(e.partial().samples.size() >= 1);
        CHECK(e.partial().samples.size() < s.record_count());
    }
}

TEST_CASE("gain sweep") {
    const auto base = pi_additive({0.6, 0.3, 0.1});
    const double kappas[] = {0.5, 0.8, 1.2, 1.6, 2.0, 2.5, 3.0, 4.0};
    const auto rows = gain_sweep(base, kappas, {1e-4, 10.0}, 2);
    REQUIRE(rows.size() == 8);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].kappa == kappas[i]);
        CHECK_FALSE(rows[i].aborted);
        CHECK(rows[i].condition_satisfied == (kappas[i] > 1.0));
        if (kappas[i] > 1.0) CHECK(rows[i].converged);
    }
    const auto serial = gain_sweep(base, kappas, {1e-4, 10.0}, 1);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(serial[i].final_error == rows[i].final_error);

    const double one[] = {2.0};
    const auto single = gain_sweep(base, one);
    const auto direct = detect_convergence(run(base), 1e-4, 10.0);
    CHECK(single[0].converged == direct.converged);
    CHECK(single[0].final_error == direct.final_error);
    CHECK(gain_sweep(base, std::span<const double>{}).empty());
}
