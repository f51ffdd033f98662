#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "biaslogit/config.hpp"

using namespace biaslogit;
using doctest::Approx;

namespace {

const std::filesystem::path kData = BIASLOGIT_TEST_DATA;

int error_line(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.line();
    }
    return -1;
}

std::string error_path(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<none>";
}

}  // namespace

TEST_CASE("minimal config materializes defaults") {
    const auto cfg = parse_config(R"({"strategies": 3})");
    CHECK(cfg.strategies == 3);
    CHECK(cfg.logit.eta == 1.0);
    CHECK(cfg.logit.beta == 1.0);
    CHECK(cfg.bias == BiasKind::none);
    CHECK(cfg.mechanism == MechanismKind::none);
    CHECK(cfg.initial_state.size() == 3);
    CHECK(cfg.initial_state[0] == Approx(1.0 / 3));
    CHECK(cfg.mu0 == Vector{0, 0, 0});
    CHECK(cfg.actual_cost.offset == Vector{0, 0, 0});
    CHECK(cfg.step == Approx(1e-3));
    CHECK(cfg.certificates.empty());
    CHECK(cfg.output_dir == "out");

    const auto fast = parse_config(R"({"strategies": 2, "logit": {"eta": 4}})");
    CHECK(fast.step == Approx(2.5e-4));
}

TEST_CASE("round trip reproduces the parsed document") {
    for (const char* name : {"theorem1.json", "sweep_kappa.json", "tabulated.json", "infeasible.json",
                             "sweep_abort.json"}) {
        const auto cfg = load_config(kData / name);
        const auto once = to_json(cfg);
        const auto again = to_json(parse_config(once.dump(), kData));
        CHECK_MESSAGE(once == again, name);
    }
    const auto doc = to_json(load_config(kData / "theorem1.json"));
    CHECK(doc["mechanism"]["kind"] == "pi");
    CHECK(doc["bias"]["curves"].size() == 3);
    CHECK(doc["integration"]["record_interval"] == 0.1);
    CHECK(doc["certificates"][0] == "all");
}

TEST_CASE("schema errors carry the offending line") {
    const std::string text = "{\n  \"strategies\": 2,\n  \"logit\": {\"eta\": 1, \"gamma\": 2}\n}";
    CHECK(error_line(text) == 3);
    CHECK(error_path(text) == "/logit/gamma");

    CHECK(error_line("{\n\"strategies\": 2,\n\"bogus\": true\n}") == 3);
    CHECK(error_line("{\n\"strategies\": 2,\n\"logit\": {\"eta\": -1}\n}") == 3);
    CHECK(error_line("{\n\"strategies\": 2,\n\n\"mechanism\": {\"kind\": \"magic\"}}") == 4);
    CHECK(error_path(R"({"strategies": 2, "initial_state": [0.5, 0.4]})") == "/initial_state");
    CHECK(error_path(R"({"strategies": 2, "initial_state": [1.0, 0.0]})") == "/initial_state");
    CHECK(error_path(R"({"strategies": 2, "target": [0.3, 0.3, 0.4]})") == "/target");
    CHECK(error_path(R"({"strategies": 1})") == "/strategies");
    CHECK(error_path(R"({"logit": {}})") == "/strategies");
    CHECK(error_path(R"({"strategies": 2, "certificates": ["bogus"]})") == "/certificates/0");
    CHECK(error_path(R"({"strategies": 2, "sweep": {"parameter": "gamma", "values": [1]}})") ==
          "/sweep/parameter");
    CHECK(error_path(R"({"strategies": 2, "bias": {"model": "additive"}})") == "/bias");
    CHECK(error_path(R"({"strategies": 2, "bias": {"model": "additive", "curve": {"family": "affine", "intercept": 1, "slope": -1}}})") ==
          "/bias/curve");
    CHECK(error_path(R"({"strategies": 2, "mechanism": {"kind": "saturated", "kappa": 1, "alpha": 0.2}})") ==
          "/mechanism");
    CHECK(error_path(R"({"strategies": 2, "mechanism": {"kind": "saturated", "mu0": [0.1, 0]}})") ==
          "/mechanism/mu0");
    CHECK(error_path(R"({"strategies": 2, "integration": {"horizon": 1, "record_interval": 0.3}})") ==
          "/integration");
}

TEST_CASE("malformed JSON reports the line of the parse error") {
    CHECK(error_line("{\n  \"strategies\": 2,\n  \"logit\": {\"eta\": }\n}") == 3);
    CHECK(error_line("{\n\n\n  \"strategies\": 2,,\n}") == 4);
}

TEST_CASE("tabulated curve paths resolve against the config directory") {
    const auto cfg = load_config(kData / "tabulated.json");
    REQUIRE(cfg.curves.size() == 2);
    const auto& table = std::get<TabulatedCurve>(cfg.curves[0]);
    CHECK(table.x.size() == 6);
    CHECK(table.source == "conformity_table.csv");
    CHECK(cfg.certificates.size() == 2);
    CHECK_THROWS_AS(parse_config(R"({"strategies": 2, "bias": {"model": "additive", "curve": {"family": "tabulated", "csv": "missing.csv"}}})",
                                 kData),
                    ConfigError);
    const auto inline_table = parse_config(
        R"({"strategies": 2, "bias": {"model": "multiplicative", "curve": {"family": "tabulated", "x": [0, 0.5, 1], "y": [2, 1.5, 1.2]}}})");
    CHECK(std::get<TabulatedCurve>(inline_table.curves[1]).y[1] == 1.5);
}

TEST_CASE("building scenarios and substituting sweep parameters") {
    const auto cfg = load_config(kData / "theorem1.json");
    const auto s = build_scenario(cfg);
    CHECK(std::holds_alternative<AdditiveBias>(s.bias));
    CHECK(s.mechanism == MechanismKind::pi);
    CHECK(s.gains.kappa == 2.0);
    CHECK(s.record_count() == 1001);

    CHECK(with_parameter(cfg, "kappa", 3.0).gains.kappa == 3.0);
    CHECK(with_parameter(cfg, "rho", 0.5).gains.rho == 0.5);
    CHECK(with_parameter(cfg, "alpha", 0.7).gains.alpha == 0.7);
    CHECK(with_parameter(cfg, "t_bar", 4.0).gains.t_bar == 4.0);
    CHECK(with_parameter(cfg, "eta", 2.0).logit.eta == 2.0);
    CHECK(with_parameter(cfg, "beta", 2.0).logit.beta == 2.0);
    CHECK(with_parameter(cfg, "step", 0.01).step == 0.01);
    CHECK_THROWS_AS(with_parameter(cfg, "nope", 1.0), std::invalid_argument);

    const auto sweep = load_config(kData / "sweep_kappa.json");
    REQUIRE(sweep.sweep.has_value());
    CHECK(sweep.sweep->parameter == "kappa");
    CHECK(sweep.sweep->values.size() == 8);
}
