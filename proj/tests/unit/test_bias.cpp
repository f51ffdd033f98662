#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "biaslogit/bias.hpp"
#include "biaslogit/output.hpp"
#include "../support/oracles.hpp"

using namespace biaslogit;
using doctest::Approx;

namespace {

std::vector<BiasCurve> sample_families() {
    return {BiasCurve::affine(1.0, 1.0), BiasCurve::affine(0.3, 2.5),
            BiasCurve::smoothstep(1.0, 0.2, 0.4), BiasCurve::smoothstep(2.0, 0.05, 1.0),
            BiasCurve::tabulated({0.0, 0.25, 0.5, 0.75, 1.0}, {1.0, 0.9, 0.5, 0.2, 0.1})};
}

double fd(const BiasCurve& c, double x, double h = 1e-5) {
    return (c.value(x + h) - c.value(x - h)) / (2 * h);
}

}  // namespace

TEST_CASE("affine additive bias values and jacobian") {
    const auto bias = AdditiveBias::uniform(2, BiasCurve::affine(1.0, 1.0));
    const auto b = bias_additive(bias, PopulationState{{0.5, 0.5}});
    CHECK(b[0] == Approx(0.5));
    CHECK(b[1] == Approx(0.5));
    const auto j = bias_additive_jacobian(bias, PopulationState{{0.3, 0.7}});
    CHECK(j[0] == -1.0);
    CHECK(j[1] == -1.0);
    CHECK(j.negative_definite());
    CHECK(bias.b_low() == Approx(0.0));
    CHECK(bias.b_high() == Approx(1.0));
    CHECK(bias.c_low() == Approx(1.0));
    CHECK(bias.c_high() == Approx(1.0));
}

TEST_CASE("additive bias is monotone and symmetric") {
    const auto bias = AdditiveBias::uniform(3, BiasCurve::smoothstep(1.0, 0.3, 0.6));
    const auto b = bias_additive(bias, PopulationState{{0.25, 0.25, 0.5}});
    CHECK(b[0] == b[1]);
    CHECK(b[2] < b[0]);
    const auto& curve = bias.curves()[0];
    for (int i = 0; i < 1000; ++i) CHECK(curve.value((i + 1) / 1001.0) < curve.value(i / 1001.0));
}

TEST_CASE("shortage coefficient for the additive model") {
    CHECK(shortage_coefficient_model1(AdditiveBias::uniform(2, BiasCurve::affine(1.0, 1.0))) == 1.0);
    CHECK(shortage_coefficient_model1(AdditiveBias::uniform(2, BiasCurve::affine(3.0, 2.5))) ==
          Approx(2.5));
    const AdditiveBias mixed({BiasCurve::affine(1.0, 1.0), BiasCurve::affine(2.0, 2.0)});
    CHECK(shortage_coefficient_model1(mixed) == Approx(2.0));
    // Slope magnitude of a smoothstep curve peaks at x = 1/2.
    const auto s = AdditiveBias::uniform(2, BiasCurve::smoothstep(1.0, 0.2, 0.4));
    double grid_max = 0.0;
    for (int i = 0; i <= 10000; ++i) grid_max = std::max(grid_max, -fd(s.curves()[0], i / 10000.0, 1e-7));
    CHECK(shortage_coefficient_model1(s) == Approx(0.2 + 1.5 * 0.4).epsilon(1e-12));
    CHECK(grid_max == Approx(0.8).epsilon(1e-6));
}

TEST_CASE("declared bounds hold on a dense grid for every family") {
    for (const auto& c : sample_families()) {
        for (int i = 0; i <= 10000; ++i) {
            const double x = i / 10000.0;
            CHECK(c.value(x) >= c.min_value() - 1e-12);
            CHECK(c.value(x) <= c.max_value() + 1e-12);
            if (i > 0 && i < 10000) {
                CHECK(-c.derivative(x) >= c.min_slope() - 1e-12);
                CHECK(-c.derivative(x) <= c.max_slope() + 1e-12);
                CHECK(c.derivative(x) < 0.0);
            }
        }
    }
}

TEST_CASE("curve derivatives match central differences") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    for (const auto& c : sample_families()) {
        for (int i = 0; i < 100; ++i) {
            const double x = u(rng);
            const double exact = c.derivative(x);
            CHECK(std::abs(exact - fd(c, x)) <= 1e-6 * std::max(1.0, std::abs(exact)));
        }
    }
}

TEST_CASE("model jacobians match finite differences of the models") {
    std::mt19937_64 rng(19);
    for (const auto& c : sample_families()) {
        const auto add = AdditiveBias::uniform(3, c);
        for (int i = 0; i < 100; ++i) {
            const auto pi = oracle::random_interior(rng, 3, 0.05);
            const auto j = bias_additive_jacobian(add, PopulationState{pi});
            for (std::size_t k = 0; k < 3; ++k) {
                // Perturb one share and compensate in the next so the point stays on the simplex;
                // each curve depends only on its own share.
                auto up = pi, down = pi;
                const double h = 1e-5;
                up[k] += h, up[(k + 1) % 3] -= h;
                down[k] -= h, down[(k + 1) % 3] += h;
                const double d = (bias_additive(add, PopulationState{up})[k] -
                                  bias_additive(add, PopulationState{down})[k]) /
                                 (2 * h);
                CHECK(std::abs(j[k] - d) <= 1e-6 * std::max(1.0, std::abs(d)));
            }
        }
    }
}

TEST_CASE("multiplicative bias") {
    const auto w = MultiplicativeBias::uniform(2, BiasCurve::affine(1.5, 1.0));
    const auto tau = bias_multiplicative(w, PopulationState{{0.5, 0.5}}, CostVector{{1, 1}});
    CHECK(tau[0] == Approx(1.0));
    CHECK(tau[1] == Approx(1.0));
    const auto zero = bias_multiplicative(w, PopulationState{{0.3, 0.7}}, CostVector{{0, 0}});
    CHECK(zero[0] == 0.0);
    CHECK(zero[1] == 0.0);
    // Weight equal to one at pi_k = 0.5 leaves T unchanged.
    const auto id = bias_multiplicative(w, PopulationState{{0.5, 0.5}}, CostVector{{2, 3}});
    CHECK(id[0] == Approx(2.0));
    CHECK(id[1] == Approx(3.0));
    CHECK(w.w_low() == Approx(0.5));
    CHECK(w.w_high() == Approx(1.5));
    CHECK(w.v_high() == Approx(1.0));
    CHECK_THROWS_AS(MultiplicativeBias::uniform(2, BiasCurve::affine(1.0, 1.0)), std::invalid_argument);
}

TEST_CASE("phi matrix") {
    const auto w = MultiplicativeBias::uniform(2, BiasCurve::affine(1.5, 1.0));
    const PopulationState pi{{0.3, 0.7}};
    const auto zero = phi_matrix(w, pi, CostVector{{0, 0}});
    CHECK(zero[0] == 0.0);
    const auto two = phi_matrix(w, pi, CostVector{{2, 2}});
    CHECK(two[0] == Approx(2.0));
    CHECK(two[1] == Approx(2.0));

    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> cost(0.0, 3.0);
    const auto sw = MultiplicativeBias::uniform(3, BiasCurve::smoothstep(2.0, 0.1, 0.5));
    for (int i = 0; i < 100; ++i) {
        const auto p = oracle::random_interior(rng, 3);
        const CostVector T{{cost(rng), cost(rng), cost(rng)}};
        const auto phi = phi_matrix(sw, PopulationState{p}, T);
        const auto jac = bias_multiplicative_jacobian(sw, PopulationState{p});
        const double tmax = std::max({T[0], T[1], T[2]});
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(phi[k] == -jac[k] * T[k]);
            CHECK(phi[k] >= 0.0);
            CHECK(phi[k] <= sw.v_high() * tmax + 1e-12);
        }
    }
}

TEST_CASE("shortage coefficient for the multiplicative model") {
    // v^H = 1, w^L = 0.5
    const auto w = MultiplicativeBias::uniform(2, BiasCurve::affine(1.5, 1.0));
    CHECK(shortage_coefficient_model2(w, 2.0) == Approx(8.0));
    CHECK(shortage_coefficient_model2(w, 4.0) == Approx(16.0));
    CHECK_THROWS_AS(shortage_coefficient_model2(w, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(shortage_coefficient_model2(w, -1.0), std::invalid_argument);
}

TEST_CASE("invalid curves are rejected at construction") {
    CHECK_THROWS_AS(BiasCurve::affine(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(BiasCurve::affine(1.0, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(BiasCurve::smoothstep(1.0, 0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(BiasCurve::tabulated({0.0, 0.5, 1.0}, {1.0, 1.2, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(BiasCurve::tabulated({0.1, 0.5, 1.0}, {1.0, 0.8, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(BiasCurve::tabulated({0.0, 0.5, 0.5, 1.0}, {1.0, 0.8, 0.7, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(AdditiveBias({BiasCurve::affine(1, 1)}), std::invalid_argument);
}

TEST_CASE("tabulated curves interpolate their knots and load from CSV") {
    const auto c = BiasCurve::tabulated({0.0, 0.25, 0.5, 0.75, 1.0}, {1.0, 0.9, 0.5, 0.2, 0.1});
    CHECK(c.value(0.25) == Approx(0.9));
    CHECK(c.value(0.75) == Approx(0.2));
    CHECK(c.value(0.3) < 0.9);
    CHECK(c.value(0.3) > 0.5);

    const auto dir = std::filesystem::temp_directory_path() / "biaslogit_bias_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "table.csv");
        out << "x,value\n# comment\n0,1\n0.25,0.9\n0.5,0.5\n0.75,0.2\n1,0.1\n";
    }
    const auto loaded = BiasCurve::from_csv(dir / "table.csv");
    for (int i = 0; i <= 100; ++i) CHECK(loaded.value(i / 100.0) == Approx(c.value(i / 100.0)));

    write_bias_table(dir / "affine.csv", BiasCurve::affine(1.0, 0.5), 11);
    const auto round = BiasCurve::from_csv(dir / "affine.csv");
    CHECK(round.value(0.35) == Approx(1.0 - 0.5 * 0.35).epsilon(1e-12));

    {
        std::ofstream out(dir / "bad.csv");
        out << "x,value\n0,1\n0.5,oops\n1,0\n";
    }
    try {
        BiasCurve::from_csv(dir / "bad.csv");
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
    std::filesystem::remove_all(dir);
}
