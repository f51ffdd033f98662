#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "biaslogit/bias.hpp"
#include "biaslogit/certificates.hpp"
#include "biaslogit/simulation.hpp"

namespace biaslogit {

/// Column names of the trajectory CSV for `n` strategies:
/// t, pi_1..pi_n, tau_1..tau_n, T_1..T_n, mu_1..mu_n, S, H_or_U, V, event_flags.
std::vector<std::string> trajectory_columns(std::size_t n);

void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& traj);
void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryRecord& traj);

/// Report as JSON. The per-sample residual series is included when `series` is set.
nlohmann::json to_json(const CertificateReport& report, bool series = true);
nlohmann::json certificates_document(std::span<const CertificateReport> reports);

/// Two-column (x, value) table of a curve sampled at `points` evenly spaced x.
void write_bias_table(const std::filesystem::path& path, const BiasCurve& curve,
                      std::size_t points = 101);

/// Writes via a temporary file and rename, so readers never see a partial file.
void write_text_file(const std::filesystem::path& path, const std::string& contents);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace biaslogit
