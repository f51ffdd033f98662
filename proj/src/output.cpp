#include "biaslogit/output.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace biaslogit {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> trajectory_columns(std::size_t n) {
    std::vector<std::string> cols{"t"};
    for (const char* prefix : {"pi_", "tau_", "T_", "mu_"}) {
        for (std::size_t k = 1; k <= n; ++k) cols.push_back(prefix + std::to_string(k));
    }
    for (const char* tail : {"S", "H_or_U", "V", "event_flags"}) cols.emplace_back(tail);
    return cols;
}

void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& traj) {
    const std::size_t n = traj.scenario.size();
    const auto cols = trajectory_columns(n);
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& s : traj.samples) {
        out << format_double(s.t);
        for (const Vector* block : {&s.pi, &s.tau, &s.T, &s.mu}) {
            for (std::size_t k = 0; k < n; ++k) {
                out << ',' << format_double(k < block->size() ? (*block)[k] : 0.0);
            }
        }
        out << ',' << format_double(s.S) << ',' << format_double(s.aux) << ','
            << format_double(s.V) << ',' << s.events << '\n';
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << contents;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryRecord& traj) {
    std::ostringstream out;
    write_trajectory_csv(out, traj);
    write_text_file(path, out.str());
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
    write_text_file(path, doc.dump(2) + "\n");
}

namespace {

// JSON has no infinity or NaN; those become null.
nlohmann::json number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

}  // namespace

nlohmann::json to_json(const CertificateReport& r, bool series) {
    nlohmann::json doc = {
        {"certificate", std::string(to_string(r.id))},
        {"verdict", std::string(to_string(r.verdict))},
        {"pass", r.passed()},
        {"violated", r.violated},
        {"worst_violation", number(r.worst_violation)},
        {"tolerance", number(r.tolerance)},
        {"scale", number(r.scale)},
        {"samples", r.residuals.size()},
        {"excluded_samples", r.excluded_times.size()},
    };
    double worst_residual = r.residuals.empty() ? 0.0 : r.residuals.front();
    for (double v : r.residuals) worst_residual = std::min(worst_residual, v);
    doc["worst_residual"] = number(worst_residual);
    if (!r.coefficient_name.empty()) {
        doc["coefficient"] = {{"name", r.coefficient_name}, {"value", number(r.estimated_coefficient)}};
    }
    if (r.id == CertificateId::lyapunov_v1 || r.id == CertificateId::lyapunov_v2) {
        doc["final_distance"] = number(r.final_distance);
    }
    if (r.id == CertificateId::lyapunov_v2) doc["max_matrix_diagonal"] = number(r.max_matrix_diagonal);
    if (!r.note.empty()) doc["note"] = r.note;
    if (series) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < r.residuals.size(); ++i) {
            rows.push_back({number(r.times[i]), number(r.residuals[i])});
        }
        doc["residuals"] = std::move(rows);
        doc["excluded_times"] = r.excluded_times;
    }
    return doc;
}

nlohmann::json certificates_document(std::span<const CertificateReport> reports) {
    nlohmann::json list = nlohmann::json::array();
    bool all_pass = true;
    for (const auto& r : reports) {
        list.push_back(to_json(r));
        all_pass = all_pass && r.passed();
    }
    return {{"all_pass", all_pass}, {"certificates", std::move(list)}};
}

void write_bias_table(const std::filesystem::path& path, const BiasCurve& curve, std::size_t points) {
    if (points < 2) throw std::invalid_argument("bias table needs at least two points");
    std::ostringstream out;
    out << "x,value\n";
    for (std::size_t i = 0; i < points; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(points - 1);
        out << format_double(x) << ',' << format_double(curve.value(x)) << '\n';
    }
    write_text_file(path, out.str());
}

}  // namespace biaslogit
