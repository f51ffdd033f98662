#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "biaslogit/bias.hpp"
#include "biaslogit/certificates.hpp"
#include "biaslogit/simulation.hpp"

namespace biaslogit {

/// Malformed or invalid experiment configuration. `line` is 0 when the
/// offending entry could not be located in the source text.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string message, std::string path, int line);

    const std::string& path() const noexcept { return path_; }
    int line() const noexcept { return line_; }

private:
    std::string path_;
    int line_;
};

enum class BiasKind { none, additive, multiplicative };

struct SweepSpec {
    std::string parameter;  // kappa, rho, alpha, t_bar, eta, beta or step
    Vector values;
};

/// One experiment, as read from a JSON document. Every optional field is
/// materialized with its default so that serialization is lossless.
struct ExperimentConfig {
    std::size_t strategies = 2;
    LogitParams logit;
    BiasKind bias = BiasKind::none;
    std::vector<BiasCurve::Definition> curves;  // one per strategy, empty when unbiased
    MechanismKind mechanism = MechanismKind::none;
    MechanismGains gains;
    Vector mu0;
    CostSignal actual_cost;
    Vector initial_state;
    Vector target;
    double horizon = 100.0;
    double step = 1e-3;
    double record_interval = 0.1;
    ConvergenceCriteria convergence;
    std::vector<CertificateId> certificates;  // empty selects every applicable one
    CertificateOptions certificate_options;
    std::optional<SweepSpec> sweep;
    std::string output_dir = "out";
};

/// Parses and validates a configuration document. Relative tabulated-curve
/// paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const ExperimentConfig& config);

Scenario build_scenario(const ExperimentConfig& config);

/// Copy of `config` with one sweepable parameter replaced.
ExperimentConfig with_parameter(const ExperimentConfig& config, const std::string& parameter,
                                double value);

std::string_view to_string(BiasKind kind);
std::string_view to_string(MechanismKind kind);

}  // namespace biaslogit
