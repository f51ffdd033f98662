#include "biaslogit/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace biaslogit {

namespace {

struct NamedCertificate {
    CertificateId id;
    std::string_view name;
};

constexpr NamedCertificate kNames[] = {
    {CertificateId::logit_passivity, "logit_delta_passivity"},
    {CertificateId::additive_shortage, "additive_bias_shortage"},
    {CertificateId::multiplicative_shortage, "multiplicative_bias_shortage"},
    {CertificateId::pi_strict_passivity, "pi_mechanism_strict_passivity"},
    {CertificateId::saturated_dini, "saturated_mechanism_dini"},
    {CertificateId::lyapunov_v1, "lyapunov_v1"},
    {CertificateId::lyapunov_v2, "lyapunov_v2"},
    {CertificateId::interconnection, "interconnection_balance"},
};

struct Assembled {
    double residual;
    double magnitude;
};

Assembled assemble(CertificateId id, const DerivativeSample& d, const ResidualCoefficients& c) {
    switch (id) {
        case CertificateId::logit_passivity: {
            const double cross = dot(d.tau_dot, d.pi_dot);
            return {-cross - d.storage_rate, std::abs(cross) + std::abs(d.storage_rate)};
        }
        case CertificateId::additive_shortage: {
            const double cross = dot(d.T_dot, d.pi_dot);
            const double quad = c.shortage * squared_norm(d.pi_dot);
            return {-cross + quad - d.storage_rate,
                    std::abs(cross) + std::abs(quad) + std::abs(d.storage_rate)};
        }
        case CertificateId::multiplicative_shortage: {
            const double cross = dot(d.T_dot, d.y);
            const double quad = c.shortage * squared_norm(d.y);
            return {-cross + quad - d.storage_rate,
                    std::abs(cross) + std::abs(quad) + std::abs(d.storage_rate)};
        }
        case CertificateId::pi_strict_passivity: {
            const double cross = dot(d.T_dot, d.pi_dot);
            const double quad = c.kappa * squared_norm(d.pi_dot);
            return {cross - quad - d.aux_rate,
                    std::abs(cross) + std::abs(quad) + std::abs(d.aux_rate)};
        }
        case CertificateId::saturated_dini: {
            const double cross = dot(d.T_dot, d.y);
            const double quad = c.kappa / (2.0 * c.w_high) * squared_norm(d.y);
            return {cross - quad - d.aux_rate,
                    std::abs(cross) + std::abs(quad) + std::abs(d.aux_rate)};
        }
        case CertificateId::interconnection: {
            const double rate = d.storage_rate + d.aux_rate;
            const double quad = (c.gamma_hat - c.rho_hat) * squared_norm(d.y);
            return {quad - rate, std::abs(quad) + std::abs(d.storage_rate) + std::abs(d.aux_rate)};
        }
        case CertificateId::lyapunov_v1:
        case CertificateId::lyapunov_v2:
            break;
    }
    throw std::invalid_argument("certificate has no derivative residual");
}

const MultiplicativeBias* multiplicative(const Scenario& s) {
    return std::get_if<MultiplicativeBias>(&s.bias);
}

const AdditiveBias* additive(const Scenario& s) { return std::get_if<AdditiveBias>(&s.bias); }

// y = W(pi) v, with W = I when the model is not multiplicative.
Vector weighted(const Scenario& s, std::span<const double> pi, const Vector& v) {
    Vector out = v;
    if (const auto* m = multiplicative(s)) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] *= m->curves()[k].value(pi[k]);
    }
    return out;
}

Vector difference(const Vector& a, const Vector& b, double scale) {
    Vector out(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = (a[k] - b[k]) * scale;
    return out;
}

Vector midpoint(const Vector& a, const Vector& b) {
    Vector out(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = 0.5 * (a[k] + b[k]);
    return out;
}

// Derivatives at sample i from central differences.
DerivativeSample central_at(const TrajectoryRecord& traj, std::size_t i) {
    const auto& prev = traj.samples[i - 1];
    const auto& next = traj.samples[i + 1];
    const double inv = 1.0 / (2.0 * traj.interval());
    DerivativeSample d;
    d.pi_dot = difference(next.pi, prev.pi, inv);
    d.tau_dot = difference(next.tau, prev.tau, inv);
    d.T_dot = difference(next.T, prev.T, inv);
    d.y = weighted(traj.scenario, traj.samples[i].pi, d.pi_dot);
    d.storage_rate = (next.S - prev.S) * inv;
    d.aux_rate = (next.aux - prev.aux) * inv;
    return d;
}

// One-sided difference over [t_i, t_{i+1}] for the nonsmooth storages; the
// smooth factors are evaluated at the interval midpoint.
DerivativeSample forward_at(const TrajectoryRecord& traj, std::size_t i) {
    const auto& cur = traj.samples[i];
    const auto& next = traj.samples[i + 1];
    const double inv = 1.0 / traj.interval();
    DerivativeSample d;
    d.pi_dot = difference(next.pi, cur.pi, inv);
    d.tau_dot = difference(next.tau, cur.tau, inv);
    d.T_dot = difference(next.T, cur.T, inv);
    d.y = weighted(traj.scenario, midpoint(cur.pi, next.pi), d.pi_dot);
    d.storage_rate = (next.S - cur.S) * inv;
    d.aux_rate = (next.aux - cur.aux) * inv;
    return d;
}

bool switch_between(const TrajectoryRecord& traj, std::size_t i) {
    const auto& s = traj.scenario;
    const auto& a = traj.samples[i];
    const auto& b = traj.samples[i + 1];
    if (b.events & kEventModeSwitch) return true;
    for (std::size_t k = 0; k < a.pi.size(); ++k) {
        const double ia = s.gains.rho * (a.pi[k] - s.target[k]) + s.gains.alpha * a.mu[k];
        const double ib = s.gains.rho * (b.pi[k] - s.target[k]) + s.gains.alpha * b.mu[k];
        if ((ia > 0.0) != (ib > 0.0)) return true;
    }
    return false;
}

void require_length(const TrajectoryRecord& traj) {
    if (traj.samples.size() < kMinCertificateSamples) {
        throw std::invalid_argument("trajectory too short to certify (needs at least 5 samples)");
    }
}

double relative_threshold(const std::vector<double>& norms) {
    double peak = 0.0;
    for (double v : norms) peak = std::max(peak, v);
    return std::max(1e-6 * peak, 1e-14);
}

// Evaluates a derivative residual along the record.
CertificateReport derivative_report(const TrajectoryRecord& traj, CertificateId id,
                                    const ResidualCoefficients& coeffs, bool forward,
                                    const CertificateOptions& options) {
    require_length(traj);
    CertificateReport report;
    report.id = id;
    const std::size_t n_samples = traj.samples.size();
    const std::size_t first = forward ? 0 : 1;
    const std::size_t last = n_samples - 1;  // exclusive

    std::set<std::size_t> excluded;
    if (forward && traj.scenario.mechanism == MechanismKind::saturated) {
        for (std::size_t i = 0; i + 1 < n_samples; ++i) {
            if (switch_between(traj, i)) {
                if (i > 0) excluded.insert(i - 1);
                excluded.insert(i);
                excluded.insert(i + 1);
            }
        }
    }

    // Per-sample numerator and squared norm of the quadratic term, used to
    // estimate the coefficient once the tolerance is known.
    std::vector<double> numerators, norms;
    double scale = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        if (excluded.count(i)) {
            report.excluded_times.push_back(traj.samples[i].t);
            continue;
        }
        const auto d = forward ? forward_at(traj, i) : central_at(traj, i);
        const auto a = assemble(id, d, coeffs);
        report.times.push_back(traj.samples[i].t);
        report.residuals.push_back(a.residual);
        scale = std::max(scale, a.magnitude);

        double norm = 0.0, numerator = 0.0;
        switch (id) {
            case CertificateId::additive_shortage:
                norm = squared_norm(d.pi_dot);
                numerator = d.storage_rate + dot(d.T_dot, d.pi_dot);
                break;
            case CertificateId::multiplicative_shortage:
                norm = squared_norm(d.y);
                numerator = d.storage_rate + dot(d.T_dot, d.y);
                break;
            case CertificateId::pi_strict_passivity:
                norm = squared_norm(d.pi_dot);
                numerator = dot(d.T_dot, d.pi_dot) - d.aux_rate;
                break;
            case CertificateId::saturated_dini:
                norm = squared_norm(d.y);
                numerator = dot(d.T_dot, d.y) - d.aux_rate;
                break;
            default:
                break;
        }
        norms.push_back(norm);
        numerators.push_back(numerator);
    }

    report.scale = scale;
    report.tolerance = options.relative_tolerance * (1.0 + scale);
    const bool equality = id == CertificateId::pi_strict_passivity;
    report.worst_violation = -std::numeric_limits<double>::infinity();
    for (double r : report.residuals) {
        report.worst_violation = std::max(report.worst_violation, equality ? std::abs(r) : -r);
    }
    if (report.residuals.empty()) report.worst_violation = 0.0;
    report.violated = report.worst_violation > report.tolerance;
    report.verdict = report.violated ? Verdict::fail : Verdict::pass;

    // Shortage coefficients: the smallest value that keeps every residual
    // within tolerance. Dini surplus: the largest such value. The PI
    // mechanism's input-strictness is an equality, so its mean is reported.
    const double tol = report.tolerance;
    const double threshold = relative_threshold(norms);
    switch (id) {
        case CertificateId::additive_shortage:
        case CertificateId::multiplicative_shortage: {
            double gamma = 0.0;
            for (std::size_t j = 0; j < norms.size(); ++j) {
                if (norms[j] > 0.0) gamma = std::max(gamma, (numerators[j] - tol) / norms[j]);
            }
            report.coefficient_name = "gamma_hat";
            report.estimated_coefficient = gamma;
            break;
        }
        case CertificateId::pi_strict_passivity: {
            double sum = 0.0;
            std::size_t used = 0;
            for (std::size_t j = 0; j < norms.size(); ++j) {
                if (norms[j] > threshold) sum += numerators[j] / norms[j], ++used;
            }
            report.coefficient_name = "kappa_hat";
            report.estimated_coefficient = used ? sum / static_cast<double>(used) : 0.0;
            break;
        }
        case CertificateId::saturated_dini: {
            double rho = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < norms.size(); ++j) {
                if (norms[j] > 0.0) rho = std::min(rho, (numerators[j] + tol) / norms[j]);
            }
            report.coefficient_name = "rho_hat";
            report.estimated_coefficient = std::isfinite(rho) ? rho : 0.0;
            break;
        }
        default:
            break;
    }
    if (!excluded.empty()) report.note = "samples next to a mechanism mode switch were excluded";
    return report;
}

double multiplicative_shortage(const TrajectoryRecord& traj, const MultiplicativeBias& m) {
    const double bound = std::max(cost_upper_bound(traj), 0.0);
    return m.v_high() * bound / (m.w_low() * m.w_low());
}

// S + aux nonincreasing between consecutive samples.
void monotone_residuals(const TrajectoryRecord& traj, CertificateReport& report, double tol) {
    for (std::size_t i = 0; i + 1 < traj.samples.size(); ++i) {
        report.times.push_back(traj.samples[i].t);
        report.residuals.push_back(traj.samples[i].V - traj.samples[i + 1].V);
    }
    report.tolerance = tol;
    report.worst_violation = -std::numeric_limits<double>::infinity();
    for (double r : report.residuals) report.worst_violation = std::max(report.worst_violation, -r);
    report.violated = report.worst_violation > tol;
    report.final_distance = distance(traj.samples.back().pi, traj.scenario.target);
}

}  // namespace

std::string_view to_string(CertificateId id) {
    for (const auto& entry : kNames) {
        if (entry.id == id) return entry.name;
    }
    return "unknown";
}

std::optional<CertificateId> certificate_from_string(std::string_view name) {
    for (const auto& entry : kNames) {
        if (entry.name == name) return entry.id;
    }
    return std::nullopt;
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::pass:
            return "pass";
        case Verdict::fail:
            return "fail";
        case Verdict::condition_unmet:
            return "condition_unmet";
    }
    return "unknown";
}

double assemble_residual(CertificateId id, const DerivativeSample& d,
                         const ResidualCoefficients& c) {
    return assemble(id, d, c).residual;
}

Vector central_difference(std::span<const double> series, double h) {
    const std::size_t n = series.size();
    if (n < 3) throw std::invalid_argument("central differences need at least three samples");
    Vector out(n);
    for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (series[i + 1] - series[i - 1]) / (2.0 * h);
    out[0] = (-3.0 * series[0] + 4.0 * series[1] - series[2]) / (2.0 * h);
    out[n - 1] = (3.0 * series[n - 1] - 4.0 * series[n - 2] + series[n - 3]) / (2.0 * h);
    return out;
}

double cost_upper_bound(const TrajectoryRecord& traj) {
    const auto& s = traj.scenario;
    switch (s.mechanism) {
        case MechanismKind::saturated:
            return s.gains.t_bar + s.gains.kappa;
        case MechanismKind::none:
            return s.actual_cost.upper_bound();
        case MechanismKind::pi:
            break;
    }
    return traj.max_cost;
}

CertificateReport certify_delta_passive(const TrajectoryRecord& traj, CertificateId which,
                                        const CertificateOptions& options) {
    const auto& s = traj.scenario;
    ResidualCoefficients c;
    c.kappa = s.gains.kappa;
    switch (which) {
        case CertificateId::logit_passivity:
            return derivative_report(traj, which, c, false, options);
        case CertificateId::additive_shortage: {
            const auto* a = additive(s);
            if (a == nullptr) throw std::invalid_argument("additive shortage needs the additive model");
            c.shortage = options.coefficient_override.value_or(shortage_coefficient_model1(*a));
            return derivative_report(traj, which, c, false, options);
        }
        case CertificateId::multiplicative_shortage: {
            const auto* m = multiplicative(s);
            if (m == nullptr) {
                throw std::invalid_argument("multiplicative shortage needs the multiplicative model");
            }
            c.shortage = options.coefficient_override.value_or(multiplicative_shortage(traj, *m));
            return derivative_report(traj, which, c, false, options);
        }
        case CertificateId::pi_strict_passivity:
            if (s.mechanism != MechanismKind::pi) {
                throw std::invalid_argument("PI strict-passivity certificate needs the PI mechanism");
            }
            return derivative_report(traj, which, c, false, options);
        case CertificateId::saturated_dini: {
            const auto* m = multiplicative(s);
            if (s.mechanism != MechanismKind::saturated || m == nullptr) {
                throw std::invalid_argument(
                    "Dini certificate needs the saturated mechanism on the multiplicative model");
            }
            c.w_high = m->w_high();
            return derivative_report(traj, which, c, true, options);
        }
        default:
            break;
    }
    throw std::invalid_argument("not a derivative certificate: " + std::string(to_string(which)));
}

CertificateReport lyapunov_v1(const TrajectoryRecord& traj, const CertificateOptions& options) {
    require_length(traj);
    const auto& s = traj.scenario;
    const auto* a = additive(s);
    if (s.mechanism != MechanismKind::pi || a == nullptr) {
        throw std::invalid_argument("lyapunov_v1 needs the PI mechanism on the additive model");
    }
    CertificateReport report;
    report.id = CertificateId::lyapunov_v1;
    monotone_residuals(traj, report, options.v1_tolerance);

    // Empirical dissipation rate -V'/||pi'||^2, which should not fall below kappa - c^H.
    std::vector<double> norms, rates;
    for (std::size_t i = 1; i + 1 < traj.samples.size(); ++i) {
        const auto d = central_at(traj, i);
        norms.push_back(squared_norm(d.pi_dot));
        rates.push_back(-(d.storage_rate + d.aux_rate));
    }
    const double threshold = relative_threshold(norms);
    bool any = false;
    for (std::size_t j = 0; j < norms.size(); ++j) {
        if (!(norms[j] > threshold)) continue;
        const double r = rates[j] / norms[j];
        report.estimated_coefficient = any ? std::min(report.estimated_coefficient, r) : r;
        any = true;
    }
    report.coefficient_name = "dissipation_rate";

    const auto gain = check_gain_condition(GainTheorem::pi_additive, s.bias, s.gains);
    if (!gain.satisfied) {
        report.verdict = Verdict::condition_unmet;
        report.note = "kappa <= c^H: monotonicity is reported but not required";
    } else {
        report.verdict = report.violated ? Verdict::fail : Verdict::pass;
    }
    return report;
}

CertificateReport lyapunov_v2(const TrajectoryRecord& traj, const CertificateOptions& options) {
    require_length(traj);
    const auto& s = traj.scenario;
    const auto* m = multiplicative(s);
    if (s.mechanism != MechanismKind::saturated || m == nullptr) {
        throw std::invalid_argument(
            "lyapunov_v2 needs the saturated mechanism on the multiplicative model");
    }
    CertificateReport report;
    report.id = CertificateId::lyapunov_v2;
    monotone_residuals(traj, report, options.v2_tolerance);

    report.max_matrix_diagonal = -std::numeric_limits<double>::infinity();
    for (const auto& sample : traj.samples) {
        for (std::size_t k = 0; k < sample.pi.size(); ++k) {
            const auto& curve = m->curves()[k];
            const double entry = -curve.derivative(sample.pi[k]) * sample.T[k] -
                                 0.5 * s.gains.kappa * curve.value(sample.pi[k]);
            report.max_matrix_diagonal = std::max(report.max_matrix_diagonal, entry);
        }
    }

    const auto gain = check_gain_condition(GainTheorem::saturated_multiplicative, s.bias, s.gains);
    if (!gain.satisfied) {
        report.verdict = Verdict::condition_unmet;
        report.note = gain.feasible ? "gain condition not met: monotonicity not required"
                                    : "gain condition infeasible for every kappa";
    } else if (!(report.max_matrix_diagonal < 0.0)) {
        report.verdict = Verdict::fail;
        report.note = "Phi - (kappa/2) W is not negative definite at some sample";
    } else {
        report.verdict = report.violated ? Verdict::fail : Verdict::pass;
    }
    return report;
}

CertificateReport interconnection_balance(const TrajectoryRecord& traj, double rho_hat,
                                          double gamma_hat, const CertificateOptions& options) {
    ResidualCoefficients c;
    c.rho_hat = rho_hat;
    c.gamma_hat = gamma_hat;
    const bool forward = traj.scenario.mechanism == MechanismKind::saturated;
    auto report = derivative_report(traj, CertificateId::interconnection, c, forward, options);

    // Combined storage must also be nonincreasing when gamma <= rho.
    double increase = 0.0;
    for (std::size_t i = 0; i + 1 < traj.samples.size(); ++i) {
        increase = std::max(increase, traj.samples[i + 1].V - traj.samples[i].V);
    }
    report.coefficient_name = "gamma_minus_rho";
    report.estimated_coefficient = gamma_hat - rho_hat;
    report.final_distance = distance(traj.samples.back().pi, traj.scenario.target);
    if (gamma_hat > rho_hat) {
        report.verdict = Verdict::condition_unmet;
        report.note = "gamma_hat > rho_hat: no decrease is implied";
    } else {
        report.violated = report.violated || increase > report.tolerance;
        report.verdict = report.violated ? Verdict::fail : Verdict::pass;
    }
    return report;
}

std::vector<CertificateId> applicable_certificates(const Scenario& s) {
    std::vector<CertificateId> out{CertificateId::logit_passivity};
    const bool is_additive = std::holds_alternative<AdditiveBias>(s.bias);
    const bool is_multiplicative = std::holds_alternative<MultiplicativeBias>(s.bias);
    const bool is_unbiased = std::holds_alternative<std::monostate>(s.bias);
    if (is_additive) out.push_back(CertificateId::additive_shortage);
    if (is_multiplicative) out.push_back(CertificateId::multiplicative_shortage);
    if (s.mechanism == MechanismKind::pi) {
        out.push_back(CertificateId::pi_strict_passivity);
        if (is_additive) out.push_back(CertificateId::lyapunov_v1);
        if (is_additive || is_unbiased) out.push_back(CertificateId::interconnection);
    }
    if (s.mechanism == MechanismKind::saturated && is_multiplicative) {
        out.push_back(CertificateId::saturated_dini);
        out.push_back(CertificateId::lyapunov_v2);
        out.push_back(CertificateId::interconnection);
    }
    return out;
}

CertificateReport certify(const TrajectoryRecord& traj, CertificateId id,
                          const CertificateOptions& options) {
    const auto& s = traj.scenario;
    switch (id) {
        case CertificateId::lyapunov_v1:
            return lyapunov_v1(traj, options);
        case CertificateId::lyapunov_v2:
            return lyapunov_v2(traj, options);
        case CertificateId::interconnection: {
            if (s.mechanism == MechanismKind::pi) {
                const auto* a = additive(s);
                if (a == nullptr && !std::holds_alternative<std::monostate>(s.bias)) break;
                return interconnection_balance(traj, s.gains.kappa, a ? a->c_high() : 0.0, options);
            }
            if (s.mechanism == MechanismKind::saturated) {
                const auto* m = multiplicative(s);
                if (m == nullptr) break;
                return interconnection_balance(traj, s.gains.kappa / (2.0 * m->w_high()),
                                               multiplicative_shortage(traj, *m), options);
            }
            break;
        }
        default:
            return certify_delta_passive(traj, id, options);
    }
    throw std::invalid_argument("interconnection balance has no natural coefficients here");
}

std::optional<CertificateReport> lyapunov_report_for(const TrajectoryRecord& traj,
                                                     const CertificateOptions& options) {
    const auto& s = traj.scenario;
    if (s.mechanism == MechanismKind::pi && additive(s)) return lyapunov_v1(traj, options);
    if (s.mechanism == MechanismKind::saturated && multiplicative(s)) {
        return lyapunov_v2(traj, options);
    }
    return std::nullopt;
}

}  // namespace biaslogit
