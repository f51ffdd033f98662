#include "biaslogit/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "biaslogit/config.hpp"
#include "biaslogit/output.hpp"

namespace biaslogit {

namespace {

using nlohmann::json;

// Short human-readable number; whole values keep a trailing ".0".
std::string pretty(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    std::string s = buf;
    if (s.find_first_of(".eni") == std::string::npos) s += ".0";
    return s;
}

json number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

std::optional<GainTheorem> theorem_for(const Scenario& s) {
    if (s.mechanism == MechanismKind::pi && std::holds_alternative<AdditiveBias>(s.bias)) {
        return GainTheorem::pi_additive;
    }
    if (s.mechanism == MechanismKind::saturated &&
        std::holds_alternative<MultiplicativeBias>(s.bias)) {
        return GainTheorem::saturated_multiplicative;
    }
    return std::nullopt;
}

json gain_json(const GainVerdict& v, GainTheorem theorem) {
    json doc = {{"theorem", theorem == GainTheorem::pi_additive ? "pi_additive"
                                                                : "saturated_multiplicative"},
                {"satisfied", v.satisfied},
                {"threshold", number(v.threshold)},
                {"margin", number(v.margin)},
                {"min_kappa", number(v.min_kappa)}};
    if (theorem == GainTheorem::saturated_multiplicative) {
        doc["feasible"] = v.feasible;
        doc["alpha_ok"] = v.alpha_ok;
        doc["t_max"] = number(v.t_max);
    }
    return doc;
}

// Strict mode fails on a violated required inequality, and also on a
// violated monotonicity check whose gain condition was not met.
bool strict_failure(const CertificateReport& r) {
    return r.verdict == Verdict::fail || (r.verdict == Verdict::condition_unmet && r.violated);
}

std::filesystem::path output_dir(const CommandOptions& options, const ExperimentConfig& cfg) {
    return options.out ? *options.out : std::filesystem::path(cfg.output_dir);
}

std::vector<CertificateId> selected_certificates(const ExperimentConfig& cfg,
                                                 const Scenario& scenario) {
    const auto applicable = applicable_certificates(scenario);
    if (cfg.certificates.empty()) return applicable;
    for (auto id : cfg.certificates) {
        if (std::find(applicable.begin(), applicable.end(), id) == applicable.end()) {
            throw ConfigError("certificate '" + std::string(to_string(id)) +
                                  "' does not apply to this model and mechanism",
                              "/certificates", 0);
        }
    }
    return cfg.certificates;
}

struct RunOutcome {
    int exit_code = kExitOk;
    json summary;
};

RunOutcome execute(const ExperimentConfig& cfg, const std::filesystem::path& dir, bool strict) {
    RunOutcome outcome;
    const Scenario scenario = build_scenario(cfg);
    const auto ids = selected_certificates(cfg, scenario);
    std::filesystem::create_directories(dir);

    ExperimentConfig resolved = cfg;
    resolved.output_dir = dir.string();
    write_json_file(dir / "config.json", to_json(resolved));

    json& summary = outcome.summary;
    summary["expected_samples"] = scenario.record_count();
    if (auto theorem = theorem_for(scenario)) {
        summary["gain_condition"] =
            gain_json(check_gain_condition(*theorem, scenario.bias, scenario.gains), *theorem);
    }

    TrajectoryRecord traj;
    try {
        traj = run(scenario);
    } catch (const RunAborted& e) {
        write_trajectory_csv(dir / "trajectory.csv", e.partial());
        summary["status"] = "aborted";
        summary["abort_reason"] = e.what();
        summary["samples"] = e.partial().samples.size();
        summary["abort_time"] = e.partial().samples.empty() ? 0.0 : e.partial().samples.back().t;
        summary["exit_code"] = kExitRunAborted;
        write_json_file(dir / "summary.json", summary);
        outcome.exit_code = kExitRunAborted;
        return outcome;
    }
    write_trajectory_csv(dir / "trajectory.csv", traj);

    std::vector<CertificateReport> reports;
    json skipped = json::array();
    for (auto id : ids) {
        try {
            reports.push_back(certify(traj, id, cfg.certificate_options));
        } catch (const std::invalid_argument& e) {
            skipped.push_back({{"certificate", std::string(to_string(id))}, {"reason", e.what()}});
        }
    }
    write_json_file(dir / "certificates.json", certificates_document(reports));

    const auto conv = detect_convergence(traj, cfg.convergence.epsilon, cfg.convergence.window);
    bool all_pass = true, strict_fail = false;
    json verdicts = json::object();
    for (const auto& r : reports) {
        all_pass = all_pass && r.passed();
        strict_fail = strict_fail || strict_failure(r);
        verdicts[std::string(to_string(r.id))] = {{"verdict", std::string(to_string(r.verdict))},
                                                  {"worst_violation", number(r.worst_violation)},
                                                  {"violated", r.violated}};
    }
    if (auto lyap = lyapunov_report_for(traj, cfg.certificate_options)) {
        summary["worst_lyapunov_increase"] = number(lyap->worst_violation);
    }
    summary["status"] = "complete";
    summary["samples"] = traj.samples.size();
    summary["final_time"] = traj.samples.back().t;
    summary["final_state"] = traj.samples.back().pi;
    summary["convergence"] = {{"converged", conv.converged},
                              {"time", number(conv.time)},
                              {"final_error", number(conv.final_error)},
                              {"epsilon", cfg.convergence.epsilon},
                              {"window", cfg.convergence.window}};
    summary["max_cost"] = number(traj.max_cost);
    summary["min_share"] = number(traj.min_share);
    summary["max_simplex_drift"] = number(traj.max_simplex_drift);
    summary["certificates"] = std::move(verdicts);
    if (!skipped.empty()) summary["skipped_certificates"] = std::move(skipped);
    summary["all_certificates_pass"] = all_pass;
    summary["strict_failure"] = strict_fail;
    outcome.exit_code = strict && strict_fail ? kExitCertificateFailed : kExitOk;
    summary["exit_code"] = outcome.exit_code;
    write_json_file(dir / "summary.json", summary);
    return outcome;
}

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfigError;
    }
}

}  // namespace

int cmd_run(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto cfg = load_config(options.config);
        const auto dir = output_dir(options, cfg);
        const auto outcome = execute(cfg, dir, options.strict);
        const auto& s = outcome.summary;
        out << "status: " << s.at("status").get<std::string>() << '\n';
        if (outcome.exit_code == kExitRunAborted) {
            err << "run aborted: " << s.at("abort_reason").get<std::string>() << '\n';
        } else {
            for (const auto& [name, v] : s.at("certificates").items()) {
                out << "  " << name << ": " << v.at("verdict").get<std::string>() << '\n';
            }
            const auto& c = s.at("convergence");
            out << "converged: " << (c.at("converged").get<bool>() ? "yes" : "no") << '\n';
        }
        out << "output: " << dir.string() << '\n';
        return outcome.exit_code;
    });
}

int cmd_check_gains(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto cfg = load_config(options.config);
        const auto scenario = build_scenario(cfg);
        const auto theorem = theorem_for(scenario);
        if (!theorem) {
            throw ConfigError("no gain condition for mechanism '" +
                                  std::string(to_string(cfg.mechanism)) + "' with bias model '" +
                                  std::string(to_string(cfg.bias)) +
                                  "' (use pi with additive, or saturated with multiplicative)",
                              "/mechanism", 0);
        }
        const auto v = check_gain_condition(*theorem, scenario.bias, scenario.gains);
        const double kappa = scenario.gains.kappa;
        if (*theorem == GainTheorem::pi_additive) {
            out << "condition: kappa > c^H (PI mechanism, additive bias)\n";
            out << "threshold=" << pretty(v.threshold) << " kappa=" << pretty(kappa) << '\n';
        } else {
            const auto& m = std::get<MultiplicativeBias>(scenario.bias);
            out << "condition: kappa w^L > 2 v^H (Tbar + kappa) (saturated mechanism, "
                   "multiplicative bias)\n";
            out << "w^L=" << pretty(m.w_low()) << " v^H=" << pretty(m.v_high())
                << " t_max=" << pretty(v.t_max) << '\n';
            out << "threshold=" << pretty(v.threshold) << " kappa=" << pretty(kappa) << '\n';
            if (!v.feasible) {
                out << "INFEASIBLE for all κ (w^L <= 2 v^H)\n";
                return options.strict ? kExitCertificateFailed : kExitOk;
            }
            out << "min_kappa=" << pretty(v.min_kappa) << '\n';
            out << "alpha " << (v.alpha_ok ? "ok" : "too small") << ": alpha="
                << pretty(scenario.gains.alpha) << " needs > " << pretty(0.5 / kappa) << '\n';
        }
        out << (v.satisfied ? "PASS" : "FAIL") << " margin=" << pretty(v.margin) << '\n';
        return !v.satisfied && options.strict ? kExitCertificateFailed : kExitOk;
    });
}

namespace {

struct SweepResult {
    std::size_t index = 0;
    double value = 0.0;
    std::string status;  // complete, aborted, invalid
    int exit_code = kExitOk;
    bool resumed = false;
    json summary;
};

std::string run_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "run_%03zu", index);
    return buf;
}

std::optional<json> completed_summary(const std::filesystem::path& dir, const std::string& parameter,
                                      double value) {
    std::ifstream in(dir / "summary.json");
    if (!in) return std::nullopt;
    try {
        json doc = json::parse(in);
        if (doc.value("status", "") != "complete") return std::nullopt;
        const auto& sweep = doc.at("sweep");
        if (sweep.at("parameter").get<std::string>() != parameter) return std::nullopt;
        if (sweep.at("value").get<double>() != value) return std::nullopt;
        return doc;
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

std::string csv_field(const json& doc, const char* key) {
    if (!doc.contains(key) || doc.at(key).is_null()) return "";
    const auto& v = doc.at(key);
    if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
    if (v.is_number()) return format_double(v.get<double>());
    std::string s = v.is_string() ? v.get<std::string>() : v.dump();
    // Commas and quotes would break the row.
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '"', '\'');
    return s;
}

}  // namespace

int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto cfg = load_config(options.config);
        if (!cfg.sweep || cfg.sweep->values.empty()) {
            throw ConfigError("sweep needs a non-empty sweep.values list", "/sweep", 0);
        }
        const auto& spec = *cfg.sweep;
        const auto root = output_dir(options, cfg);
        std::filesystem::create_directories(root);

        std::vector<SweepResult> results(spec.values.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < results.size(); i = next++) {
                auto& r = results[i];
                r.index = i;
                r.value = spec.values[i];
                const auto dir = root / run_name(i);
                const json sweep = {{"parameter", spec.parameter}, {"value", r.value}, {"index", i}};
                if (options.resume) {
                    if (auto done = completed_summary(dir, spec.parameter, r.value)) {
                        r.status = "complete";
                        r.exit_code = done->value("exit_code", 0);
                        r.resumed = true;
                        r.summary = std::move(*done);
                        continue;
                    }
                }
                try {
                    auto cfg_i = with_parameter(cfg, spec.parameter, r.value);
                    cfg_i.sweep.reset();
                    build_scenario(cfg_i).validate();
                    auto outcome = execute(cfg_i, dir, options.strict);
                    r.summary = std::move(outcome.summary);
                    r.exit_code = outcome.exit_code;
                    r.status = r.summary.at("status").get<std::string>();
                } catch (const std::exception& e) {
                    r.status = "invalid";
                    r.exit_code = kExitConfigError;
                    r.summary = {{"status", "invalid"}, {"error", e.what()}};
                }
                r.summary["sweep"] = sweep;
                write_json_file(dir / "summary.json", r.summary);
            }
        };
        const unsigned threads =
            std::max(1u, std::min<unsigned>(options.threads == 0 ? std::thread::hardware_concurrency()
                                                                 : options.threads,
                                            static_cast<unsigned>(results.size())));
        {
            std::vector<std::jthread> pool;
            for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
            worker();
        }

        std::ostringstream csv;
        csv << "index,parameter,value,status,exit_code,gain_condition_satisfied,converged,"
               "convergence_time,final_error,all_certificates_pass,worst_lyapunov_increase,run_dir,"
               "note\n";
        bool any_aborted = false, any_invalid = false, any_strict = false;
        for (const auto& r : results) {
            const auto& s = r.summary;
            json conv = s.value("convergence", json::object());
            json gain = s.value("gain_condition", json::object());
            csv << r.index << ',' << spec.parameter << ',' << format_double(r.value) << ','
                << r.status << ',' << r.exit_code << ',' << csv_field(gain, "satisfied") << ','
                << csv_field(conv, "converged") << ',' << csv_field(conv, "time") << ','
                << csv_field(conv, "final_error") << ',' << csv_field(s, "all_certificates_pass")
                << ',' << csv_field(s, "worst_lyapunov_increase") << ',' << run_name(r.index) << ','
                << (r.status == "aborted" ? csv_field(s, "abort_reason") : csv_field(s, "error"))
                << '\n';
            any_aborted = any_aborted || r.status == "aborted";
            any_invalid = any_invalid || r.status == "invalid";
            any_strict = any_strict || r.exit_code == kExitCertificateFailed;
            out << run_name(r.index) << ' ' << spec.parameter << '=' << pretty(r.value) << ' '
                << r.status << (r.resumed ? " (resumed)" : "") << '\n';
            if (r.status == "invalid") err << run_name(r.index) << ": " << csv_field(s, "error") << '\n';
        }
        write_text_file(root / "summary.csv", csv.str());
        out << "summary: " << (root / "summary.csv").string() << '\n';
        if (any_aborted) return static_cast<int>(kExitRunAborted);
        if (any_invalid) return static_cast<int>(kExitConfigError);
        if (any_strict) return static_cast<int>(kExitCertificateFailed);
        return static_cast<int>(kExitOk);
    });
}

}  // namespace biaslogit
