#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biaslogit/simulation.hpp"

namespace biaslogit {

/// Inequalities that can be certified along a recorded trajectory.
enum class CertificateId {
    logit_passivity,          // S' <= -tau'^T pi'
    additive_shortage,        // S' <= -T'^T pi' + c^H ||pi'||^2
    multiplicative_shortage,  // S' <= -T'^T y + (v^H T_max / (w^L)^2) ||y||^2
    pi_strict_passivity,      // H' = T'^T pi' - kappa ||pi'||^2   (equality)
    saturated_dini,           // D+U <= T'^T y - (kappa / (2 w^H)) ||y||^2
    lyapunov_v1,              // S + H nonincreasing (PI mechanism, additive bias)
    lyapunov_v2,              // S + U nonincreasing (saturated mechanism, multiplicative bias)
    interconnection,          // (S + H or U)' <= (gamma - rho) ||pi' or y||^2
};

std::string_view to_string(CertificateId id);
std::optional<CertificateId> certificate_from_string(std::string_view name);

enum class Verdict { pass, fail, condition_unmet };
std::string_view to_string(Verdict v);

struct CertificateReport {
    CertificateId id = CertificateId::logit_passivity;
    std::vector<double> times;
    std::vector<double> residuals;       // signed slack; negative means violated
    std::vector<double> excluded_times;  // samples straddling a mode switch
    double worst_violation = 0.0;        // max(-residual) (max |residual| for equalities)
    double tolerance = 0.0;
    double scale = 0.0;  // signal magnitude the tolerance was scaled by
    Verdict verdict = Verdict::pass;
    bool violated = false;  // worst_violation > tolerance, regardless of verdict
    std::string coefficient_name;
    double estimated_coefficient = 0.0;
    double final_distance = 0.0;            // ||pi(t_f) - pi*|| for Lyapunov reports
    double max_matrix_diagonal = 0.0;       // lyapunov_v2: max diag of Phi - (kappa/2) W
    std::string note;

    bool passed() const noexcept { return verdict == Verdict::pass; }
};

struct CertificateOptions {
    double relative_tolerance = 1e-3;  // tol = relative_tolerance * (1 + scale)
    double v1_tolerance = 1e-4;        // absolute, per-sample increase of S + H
    double v2_tolerance = 1e-3;        // absolute, per-sample increase of S + U
    /// Replaces the shortage coefficient (c^H or v^H T_max / (w^L)^2).
    std::optional<double> coefficient_override;
};

/// Minimum number of samples a trajectory needs to be certified.
inline constexpr std::size_t kMinCertificateSamples = 5;

/// Time derivatives at one instant, as used by the residual formulas.
struct DerivativeSample {
    Vector pi_dot, tau_dot, T_dot, y;
    double storage_rate = 0.0;  // S'
    double aux_rate = 0.0;      // H' or D+U
};

struct ResidualCoefficients {
    double shortage = 0.0;  // c^H or v^H T_max / (w^L)^2
    double kappa = 0.0;
    double w_high = 1.0;
    double rho_hat = 0.0;    // interconnection: passivity surplus
    double gamma_hat = 0.0;  // interconnection: impact coefficient
};

/// Residual (slack) of one inequality given exact or estimated derivatives.
/// For `interconnection`, aux_rate + storage_rate is the combined rate and y
/// the interconnection signal.
double assemble_residual(CertificateId id, const DerivativeSample& d,
                         const ResidualCoefficients& c);

/// Second-order central differences (one-sided second-order at the ends).
Vector central_difference(std::span<const double> series, double h);

/// Derivative-based certificates (logit passivity, both shortages, PI strict
/// passivity and the saturated-mechanism Dini bound).
CertificateReport certify_delta_passive(const TrajectoryRecord& traj, CertificateId which,
                                        const CertificateOptions& options = {});

CertificateReport lyapunov_v1(const TrajectoryRecord& traj, const CertificateOptions& options = {});
CertificateReport lyapunov_v2(const TrajectoryRecord& traj, const CertificateOptions& options = {});

/// Combined storage of the logit block and the mechanism against
/// (gamma_hat - rho_hat) ||z||^2, z = pi' (or y under the saturated mechanism).
CertificateReport interconnection_balance(const TrajectoryRecord& traj, double rho_hat,
                                          double gamma_hat, const CertificateOptions& options = {});

/// Certificates that make sense for the scenario's model and mechanism.
std::vector<CertificateId> applicable_certificates(const Scenario& scenario);

/// Runs one certificate with the scenario's natural coefficients
/// (interconnection uses rho_hat = kappa, gamma_hat = c^H for the PI mechanism
/// and rho_hat = kappa / (2 w^H), gamma_hat = v^H T_max / (w^L)^2 for the
/// saturated one).
CertificateReport certify(const TrajectoryRecord& traj, CertificateId id,
                          const CertificateOptions& options = {});

/// The Lyapunov report matching the scenario's mechanism, if any.
std::optional<CertificateReport> lyapunov_report_for(const TrajectoryRecord& traj,
                                                     const CertificateOptions& options = {});

/// Cost bound used by the multiplicative shortage coefficient: Tbar + kappa
/// for the saturated mechanism, the signal bound for exogenous costs and the
/// observed maximum otherwise.
double cost_upper_bound(const TrajectoryRecord& traj);

}  // namespace biaslogit
