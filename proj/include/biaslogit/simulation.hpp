#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "biaslogit/bias.hpp"
#include "biaslogit/mechanisms.hpp"
#include "biaslogit/types.hpp"

namespace biaslogit {

struct Sinusoid {
    double amplitude = 0.0;
    double frequency = 1.0;  // angular frequency (rad / time)
    double phase = 0.0;
};

/// Exogenous actual cost T_k(t) = offset_k + sum_j a_j sin(omega_j t + phi_j),
/// used when no mechanism drives T.
struct CostSignal {
    Vector offset;
    std::vector<std::vector<Sinusoid>> waves;  // empty, or one list per strategy

    void value(double t, std::span<double> out) const;
    void derivative(double t, std::span<double> out) const;
    /// Upper bound on max_k T_k(t) over all t.
    double upper_bound() const;
};

struct Scenario {
    LogitParams logit;
    BiasModel bias;
    MechanismKind mechanism = MechanismKind::none;
    MechanismGains gains;
    CostSignal actual_cost;  // mechanism == none
    Vector pi0;
    Vector mu0;
    Vector target;
    double horizon = 100.0;
    double step = 1e-3;
    double record_interval = 0.1;

    std::size_t size() const noexcept { return logit.n; }
    /// Steps per record and record count; both must come out as integers.
    std::size_t steps_per_record() const;
    std::size_t record_count() const;
    void validate() const;
};

/// Smallest initial share accepted for pi(0) and pi*.
inline constexpr double kInteriorMargin = 1e-6;
/// Allowed drift of 1'pi away from 1 before a run aborts.
inline constexpr double kSimplexDriftTolerance = 1e-7;

enum EventFlag : std::uint32_t {
    kEventNone = 0,
    kEventClamp = 1u << 0,         // Bregman storage argument clamped to [0, 1]
    kEventModeSwitch = 1u << 1,    // saturated mechanism changed branch since last sample
    kEventNegativeCost = 1u << 2,  // some T_k < 0 under the multiplicative model
};

struct TrajectorySample {
    double t = 0.0;
    Vector pi, tau, T, mu, y;  // y = W(pi) pi' (pi' when there is no multiplicative bias)
    double S = 0.0;            // logit storage
    double aux = 0.0;          // H (PI mechanism), U (saturated mechanism), 0 otherwise
    double V = 0.0;            // S + aux
    std::uint32_t events = kEventNone;
};

struct TrajectoryRecord {
    Scenario scenario;
    std::vector<TrajectorySample> samples;
    double max_cost = 0.0;  // running max of T_k over all integrator steps
    double min_share = 1.0;
    double max_simplex_drift = 0.0;

    double interval() const noexcept { return scenario.record_interval; }
};

/// Raised when an invariant breaks mid-run; carries everything recorded so far.
class RunAborted : public std::runtime_error {
public:
    RunAborted(const std::string& what, TrajectoryRecord partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const TrajectoryRecord& partial() const noexcept { return partial_; }

private:
    TrajectoryRecord partial_;
};

/// Fixed-step RK4 integration of the closed loop (logit dynamics, bias model,
/// mechanism or exogenous cost). No projection onto the simplex: drift beyond
/// kSimplexDriftTolerance, loss of interiority, mu > 0 or T_k >= Tbar + kappa
/// under the saturated mechanism abort the run.
TrajectoryRecord run(const Scenario& scenario);

struct ConvergenceResult {
    bool converged = false;
    double time = 0.0;  // first sample time after which the error stays below epsilon
    double final_error = 0.0;
};

/// Converged iff ||pi(t) - pi*|| < epsilon for every sample in the trailing
/// `window` of the record.
ConvergenceResult detect_convergence(const TrajectoryRecord& traj, double epsilon, double window);

struct ConvergenceCriteria {
    double epsilon = 1e-4;
    double window = 10.0;
};

struct SweepRow {
    double kappa = 0.0;
    bool aborted = false;
    std::string abort_reason;
    bool condition_satisfied = false;  // sufficient gain condition, when one applies
    bool converged = false;
    double convergence_time = 0.0;
    double final_error = 0.0;
    double worst_residual = 0.0;  // worst Lyapunov-monotonicity violation
};

/// One run per kappa, spread over `threads` workers. Rows keep input order.
std::vector<SweepRow> gain_sweep(const Scenario& base, std::span<const double> kappa_values,
                                 const ConvergenceCriteria& criteria = {},
                                 unsigned threads = 1);

}  // namespace biaslogit
