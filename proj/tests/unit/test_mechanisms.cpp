#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "biaslogit/mechanisms.hpp"
#include "../support/oracles.hpp"

using namespace biaslogit;
using doctest::Approx;

namespace {

MechanismState state(Vector mu, double rho = 1, double kappa = 2, double alpha = 1, double t_bar = 1) {
    return {std::move(mu), MechanismGains{rho, kappa, alpha, t_bar}};
}

TargetState target(Vector p) { return {PopulationState{std::move(p)}}; }

// Primitive of w = 2 - x with F(0) = F'(0) = 0, and the inverse of F'.
double affine_f(double x) { return x * x - x * x * x / 6.0; }
double affine_grad(double x) { return 2.0 * x - 0.5 * x * x; }
double affine_inverse(double z) { return 2.0 - std::sqrt(4.0 - 2.0 * z); }

// Numeric primitives of an arbitrary weight, by nested Simpson integration.
struct NumericPrimitive {
    const BiasCurve& w;
    double grad(double x) const { return oracle::simpson([&](double s) { return w.value(s); }, 0.0, x); }
    double value(double x) const {
        return oracle::simpson([&](double s) { return grad(s); }, 0.0, x, 200);
    }
};

}  // namespace

TEST_CASE("PI mechanism step") {
    const auto at_target = mech1_step(state({0.3, -0.3}), PopulationState{{0.5, 0.5}}, target({0.5, 0.5}));
    CHECK(at_target.mu_dot[0] == 0.0);
    CHECK(at_target.T[0] == Approx(0.3));
    CHECK(at_target.T[1] == Approx(-0.3));

    const auto out = mech1_step(state({0, 0}), PopulationState{{0.6, 0.4}}, target({0.5, 0.5}));
    CHECK(out.mu_dot[0] == Approx(0.1));
    CHECK(out.mu_dot[1] == Approx(-0.1));
    CHECK(out.T[0] == Approx(0.2));
    CHECK(out.T[1] == Approx(-0.2));

    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) {
        const auto p = oracle::random_interior(rng, 4);
        const auto q = oracle::random_interior(rng, 4);
        const auto r = mech1_step(state({0.1, 0.2, -0.5, 0.0}, 1.3), PopulationState{p}, target(q));
        CHECK(std::abs(r.mu_dot[0] + r.mu_dot[1] + r.mu_dot[2] + r.mu_dot[3]) < 1e-15);
    }
}

TEST_CASE("saturated mechanism step") {
    const auto zero = mech2_step(state({0, 0}), PopulationState{{0.6, 0.4}}, target({0.5, 0.5}));
    CHECK(zero.mu_dot[0] == 0.0);  // min{0.1, 0}
    CHECK(zero.mu_dot[1] == Approx(-0.1));

    const auto out = mech2_step(state({-1, 0}, 1, 2, 1), PopulationState{{0.4, 0.6}}, target({0.5, 0.5}));
    CHECK(out.mu_dot[0] == Approx(-0.1));
    CHECK(out.mu_dot[1] == 0.0);

    const auto t = mech2_step(state({-0.5, 0}, 1, 1, 1, 2), PopulationState{{0.6, 0.4}}, target({0.5, 0.5}));
    CHECK(t.T[0] == Approx(1.6));
    CHECK(t.T[1] == Approx(1.9));
    CHECK(t.T[0] < 3.0);
    CHECK(t.T[1] < 3.0);

    CHECK_THROWS_AS(mech2_step(state({0.01, 0}), PopulationState{{0.6, 0.4}}, target({0.5, 0.5})),
                    InvariantViolation);
    CHECK_NOTHROW(mech2_step(state({1e-13, 0}), PopulationState{{0.6, 0.4}}, target({0.5, 0.5})));
}

TEST_CASE("gain validation") {
    CHECK_THROWS_AS((MechanismGains{0, 1, 1, 1}.validate(MechanismKind::pi)), std::invalid_argument);
    CHECK_THROWS_AS((MechanismGains{1, 0, 1, 1}.validate(MechanismKind::pi)), std::invalid_argument);
    CHECK_THROWS_AS((MechanismGains{1, 1, 0.5, 1}.validate(MechanismKind::saturated)), std::invalid_argument);
    CHECK_NOTHROW((MechanismGains{1, 1, 0.51, 1}.validate(MechanismKind::saturated)));
    CHECK_THROWS_AS((MechanismGains{1, 1, 1, 0}.validate(MechanismKind::saturated)), std::invalid_argument);
}

TEST_CASE("storage H") {
    CHECK(storage_h(PopulationState{{0.5, 0.5}}, target({0.5, 0.5}), 3.0) == 0.0);
    CHECK(storage_h(PopulationState{{0.6, 0.4}}, target({0.5, 0.5}), 2.0) == Approx(0.02));
    CHECK(storage_h(PopulationState{{0.6, 0.4}}, target({0.5, 0.5}), 6.0) == Approx(0.06));
}

TEST_CASE("conjugate pair of an affine weight matches the analytic primitive") {
    const ConjugatePair pair(BiasCurve::affine(2.0, 1.0));
    CHECK(pair.primitive(0.5) == Approx(0.2291667).epsilon(1e-7));
    CHECK(pair.primitive_grad(0.5) == Approx(0.875).epsilon(1e-15));
    CHECK(pair.conjugate_grad(0.875) == Approx(0.5).epsilon(1e-12));
    CHECK(pair.conjugate_value(0.875) == Approx(0.2083333).epsilon(1e-7));
    CHECK(std::abs(pair.conjugate_value(0.875) - (0.875 * 0.5 - affine_f(0.5))) < 1e-12);
    CHECK(pair.conjugate_grad(0.0) == 0.0);
    CHECK(pair.conjugate_value(0.0) == Approx(0.0));
    for (int i = 1; i < 100; ++i) {
        const double x = i / 100.0;
        CHECK(pair.primitive(x) == Approx(affine_f(x)).epsilon(1e-13));
        const double z = affine_grad(x);
        CHECK(std::abs(pair.conjugate_grad(z) - affine_inverse(z)) < 1e-10);
    }
    // Out-of-range arguments clamp to the ends.
    CHECK(pair.conjugate_grad(-1.0) == 0.0);
    CHECK(pair.conjugate_grad(10.0) == 1.0);
    CHECK(pair.conjugate_value(10.0) == Approx(10.0 - affine_f(1.0)));
}

TEST_CASE("conjugate machinery on non-affine weights") {
    const BiasCurve curves[] = {
        BiasCurve::smoothstep(2.0, 0.2, 0.6),
        BiasCurve::tabulated({0.0, 0.2, 0.5, 0.8, 1.0}, {3.0, 2.5, 1.4, 1.1, 1.0}),
    };
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.005, 0.995);
    for (const auto& w : curves) {
        const ConjugatePair pair(w);
        const NumericPrimitive ref{w};
        for (int i = 0; i < 20; ++i) {
            const double x = u(rng);
            CHECK(std::abs(pair.primitive_grad(x) - ref.grad(x)) < 1e-10);
            CHECK(std::abs(pair.primitive(x) - ref.value(x)) < 1e-9);
        }
        for (int i = 0; i < 100; ++i) {
            const double x = u(rng);
            const double z = pair.primitive_grad(x);
            CHECK(std::abs(pair.conjugate_grad(z) - x) <= 1e-8);
            // Fenchel-Young equality at matched pairs
            CHECK(std::abs(pair.primitive(x) + pair.conjugate_value(z) - x * z) <= 1e-8);
            // second derivative of F equals the weight
            const double h = 1e-4;
            const double hess = (pair.primitive_grad(x + h) - pair.primitive_grad(x - h)) / (2 * h);
            CHECK(std::abs(hess - w.value(x)) <= 1e-6);
            // inverse by bisection on the numeric primitive
            const double inv = oracle::bisect_increasing([&](double s) { return pair.primitive_grad(s); }, z, 0, 1);
            CHECK(std::abs(inv - pair.conjugate_grad(z)) <= 1e-10);
        }
        // Fenchel-Young inequality and convexity of F*
        for (int i = 0; i < 100; ++i) {
            const double x = u(rng);
            const double z = 3.0 * u(rng) - 0.5;
            CHECK(pair.primitive(x) + pair.conjugate_value(z) >= x * z - 1e-12);
            const double a = 3.0 * u(rng), b = 3.0 * u(rng);
            CHECK(pair.conjugate_value(0.5 * (a + b)) <=
                  0.5 * (pair.conjugate_value(a) + pair.conjugate_value(b)) + 1e-12);
        }
    }
}

TEST_CASE("storage U") {
    const auto w = MultiplicativeBias::uniform(2, BiasCurve::affine(2.0, 1.0));
    const auto pairs = make_conjugate_pairs(w);
    const auto tgt = target({0.5, 0.5});
    CHECK(std::abs(storage_u(state({0, 0}), PopulationState{{0.5, 0.5}}, tgt, pairs)) < 1e-14);

    // Direct Bregman evaluation with analytic conjugates.
    auto bregman = [&](const Vector& mu, const Vector& pi, const Vector& star, double rho, double alpha) {
        double total = 0.0;
        for (std::size_t k = 0; k < pi.size(); ++k) {
            const double m = std::clamp(std::min(pi[k], star[k] - alpha / rho * mu[k]), 0.0, 1.0);
            const double z = affine_grad(m), zs = affine_grad(star[k]);
            const double fz = z * affine_inverse(z) - affine_f(affine_inverse(z));
            const double fs = zs * star[k] - affine_f(star[k]);
            total += rho * (fz - fs - (z - zs) * star[k]);
        }
        return total;
    };
    const double u1 = storage_u(state({0, 0}, 1, 2, 1), PopulationState{{0.6, 0.4}}, tgt, pairs);
    CHECK(u1 > 0.0);
    CHECK(u1 == Approx(bregman({0, 0}, {0.6, 0.4}, {0.5, 0.5}, 1, 1)).epsilon(1e-12));

    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> neg(-0.5, 0.0);
    for (int i = 0; i < 100; ++i) {
        const auto p = oracle::random_interior(rng, 2);
        const auto q = oracle::random_interior(rng, 2, 0.1);
        const Vector mu{neg(rng), neg(rng)};
        const auto s = state(mu, 1.5, 2, 0.8);
        const double value = storage_u(s, PopulationState{p}, target(q), pairs);
        CHECK(value >= -1e-14);
        CHECK(value == Approx(bregman(mu, p, q, 1.5, 0.8)).epsilon(1e-10));
    }

    // Same alpha / rho ratio, doubled rho.
    const double u2 = storage_u(state({-0.2, 0}, 2, 2, 1), PopulationState{{0.6, 0.4}}, tgt, pairs);
    const double u3 = storage_u(state({-0.2, 0}, 1, 2, 0.5), PopulationState{{0.6, 0.4}}, tgt, pairs);
    CHECK(u2 == Approx(2.0 * u3).epsilon(1e-12));
}

TEST_CASE("storage U clamps large min-arguments") {
    const auto pairs = make_conjugate_pairs(MultiplicativeBias::uniform(2, BiasCurve::affine(2.0, 1.0)));
    // pi* - (alpha/rho) mu > 1 but pi itself is interior, so the min never leaves [0, 1]
    const auto r = storage_u_detailed(state({-5, 0}), PopulationState{{0.6, 0.4}}, target({0.5, 0.5}), pairs);
    CHECK_FALSE(r.clamped);
    CHECK(r.value >= 0.0);
}

TEST_CASE("gain conditions") {
    const BiasModel add = AdditiveBias::uniform(3, BiasCurve::affine(1.0, 1.0));
    const auto v1 = check_gain_condition(GainTheorem::pi_additive, add, MechanismGains{1, 2, 1, 1});
    CHECK(v1.satisfied);
    CHECK(v1.margin == Approx(1.0));
    CHECK_FALSE(check_gain_condition(GainTheorem::pi_additive, add, MechanismGains{1, 1, 1, 1}).satisfied);

    // v^H = 0.1, w^L = 1
    const BiasModel mult = MultiplicativeBias::uniform(3, BiasCurve::affine(1.1, 0.1));
    const auto v2 = check_gain_condition(GainTheorem::saturated_multiplicative, mult, MechanismGains{1, 1, 1, 1});
    CHECK(v2.threshold == Approx(0.4));
    CHECK(v2.satisfied);
    CHECK(v2.feasible);
    CHECK(v2.min_kappa == Approx(0.2 / 0.8));
    // just above and below the smallest admissible kappa
    CHECK(check_gain_condition(GainTheorem::saturated_multiplicative, mult,
                               MechanismGains{1, v2.min_kappa * 1.001, 1000, 1})
              .satisfied);
    CHECK_FALSE(check_gain_condition(GainTheorem::saturated_multiplicative, mult,
                                     MechanismGains{1, v2.min_kappa * 0.999, 1000, 1})
                    .satisfied);
    CHECK_FALSE(check_gain_condition(GainTheorem::saturated_multiplicative, mult,
                                     MechanismGains{1, 1, 0.4, 1})
                    .alpha_ok);

    // w^L = 0.2 <= 2 v^H = 0.2: nothing works
    const BiasModel hopeless = MultiplicativeBias::uniform(3, BiasCurve::affine(0.3, 0.1));
    for (double kappa : {0.1, 1.0, 10.0, 1e6}) {
        const auto v = check_gain_condition(GainTheorem::saturated_multiplicative, hopeless,
                                            MechanismGains{1, kappa, 1, 1});
        CHECK_FALSE(v.feasible);
        CHECK_FALSE(v.satisfied);
    }

    CHECK_THROWS_AS(check_gain_condition(GainTheorem::saturated_multiplicative, add, MechanismGains{}),
                    std::invalid_argument);
    CHECK_THROWS_AS(check_gain_condition(GainTheorem::pi_additive, mult, MechanismGains{}),
                    std::invalid_argument);
}
