#include "biaslogit/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "biaslogit/certificates.hpp"
#include "biaslogit/dynamics.hpp"

namespace biaslogit {

void CostSignal::value(double t, std::span<double> out) const {
    for (std::size_t k = 0; k < out.size(); ++k) {
        double v = offset.empty() ? 0.0 : offset[k];
        if (!waves.empty()) {
            for (const auto& w : waves[k]) v += w.amplitude * std::sin(w.frequency * t + w.phase);
        }
        out[k] = v;
    }
}

void CostSignal::derivative(double t, std::span<double> out) const {
    for (std::size_t k = 0; k < out.size(); ++k) {
        double v = 0.0;
        if (!waves.empty()) {
            for (const auto& w : waves[k]) {
                v += w.amplitude * w.frequency * std::cos(w.frequency * t + w.phase);
            }
        }
        out[k] = v;
    }
}

double CostSignal::upper_bound() const {
    double bound = -std::numeric_limits<double>::infinity();
    const std::size_t n = std::max(offset.size(), waves.size());
    for (std::size_t k = 0; k < n; ++k) {
        double v = offset.empty() ? 0.0 : offset[k];
        if (!waves.empty()) {
            for (const auto& w : waves[k]) v += std::abs(w.amplitude);
        }
        bound = std::max(bound, v);
    }
    return bound;
}

namespace {

std::size_t integer_ratio(double numerator, double denominator, const char* what) {
    const double ratio = numerator / denominator;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, rounded)) {
        std::ostringstream msg;
        msg << what << " (" << numerator << " / " << denominator << ") is not a positive integer";
        throw std::invalid_argument(msg.str());
    }
    return static_cast<std::size_t>(rounded);
}

void require_interior(const Vector& v, const char* what) {
    PopulationState checked{v};  // throws on a non-simplex vector
    for (double p : v) {
        if (p < kInteriorMargin) {
            std::ostringstream msg;
            msg << what << " has a share below " << kInteriorMargin << " (boundary of the simplex)";
            throw std::invalid_argument(msg.str());
        }
    }
}

std::size_t bias_size(const BiasModel& bias) {
    if (const auto* a = std::get_if<AdditiveBias>(&bias)) return a->size();
    if (const auto* m = std::get_if<MultiplicativeBias>(&bias)) return m->size();
    return 0;
}

Scenario with_defaults(const Scenario& s) {
    Scenario out = s;
    const std::size_t n = s.logit.n;
    if (out.pi0.empty()) out.pi0.assign(n, 1.0 / static_cast<double>(n));
    if (out.target.empty()) out.target.assign(n, 1.0 / static_cast<double>(n));
    if (out.mu0.empty()) out.mu0.assign(n, 0.0);
    if (out.actual_cost.offset.empty()) out.actual_cost.offset.assign(n, 0.0);
    return out;
}

// Closed-loop vector field over the packed state (pi, mu).
class ClosedLoop {
public:
    explicit ClosedLoop(const Scenario& s)
        : s_(s), n_(s.size()), tau_(n_), T_(n_), q_(n_), mu_dot_(n_) {
        if (const auto* m = std::get_if<MultiplicativeBias>(&s.bias)) {
            if (s.mechanism == MechanismKind::saturated) pairs_ = make_conjugate_pairs(*m);
        }
    }

    std::size_t dimension() const { return s_.mechanism == MechanismKind::none ? n_ : 2 * n_; }

    // Fills T_, tau_ and the state derivative.
    void rates(double t, std::span<const double> x, std::span<double> dx) {
        const auto pi = x.subspan(0, n_);
        const std::span<const double> target(s_.target);
        switch (s_.mechanism) {
            case MechanismKind::none:
                s_.actual_cost.value(t, T_);
                break;
            case MechanismKind::pi:
                detail::pi_mechanism(x.subspan(n_, n_), pi, target, s_.gains, mu_dot_, T_);
                break;
            case MechanismKind::saturated:
                detail::saturated_mechanism(x.subspan(n_, n_), pi, target, s_.gains, mu_dot_, T_);
                break;
        }
        if (const auto* a = std::get_if<AdditiveBias>(&s_.bias)) {
            for (std::size_t k = 0; k < n_; ++k) tau_[k] = T_[k] + a->curves()[k].value(pi[k]);
        } else if (const auto* m = std::get_if<MultiplicativeBias>(&s_.bias)) {
            for (std::size_t k = 0; k < n_; ++k) tau_[k] = m->curves()[k].value(pi[k]) * T_[k];
        } else {
            std::copy(T_.begin(), T_.end(), tau_.begin());
        }
        detail::softmax(tau_, s_.logit.beta, q_);
        for (std::size_t k = 0; k < n_; ++k) dx[k] = s_.logit.eta * (q_[k] - pi[k]);
        if (s_.mechanism != MechanismKind::none) {
            std::copy(mu_dot_.begin(), mu_dot_.end(), dx.begin() + static_cast<long>(n_));
        }
    }

    TrajectorySample sample(double t, std::span<const double> x, std::span<double> dx) {
        rates(t, x, dx);
        TrajectorySample out;
        out.t = t;
        out.pi.assign(x.begin(), x.begin() + static_cast<long>(n_));
        out.tau = tau_;
        out.T = T_;
        if (s_.mechanism != MechanismKind::none) {
            out.mu.assign(x.begin() + static_cast<long>(n_), x.end());
        } else {
            out.mu.assign(n_, 0.0);
        }
        out.y.assign(dx.begin(), dx.begin() + static_cast<long>(n_));
        if (const auto* m = std::get_if<MultiplicativeBias>(&s_.bias)) {
            for (std::size_t k = 0; k < n_; ++k) {
                out.y[k] *= m->curves()[k].value(out.pi[k]);
                if (out.T[k] < 0.0) out.events |= kEventNegativeCost;
            }
        }
        out.S = detail::storage(out.tau, out.pi, s_.logit.eta, s_.logit.beta);
        if (s_.mechanism == MechanismKind::pi) {
            const double d = distance(out.pi, s_.target);
            out.aux = 0.5 * s_.gains.rho * d * d;
        } else if (s_.mechanism == MechanismKind::saturated && !pairs_.empty()) {
            const auto u = detail::bregman_storage(out.mu, out.pi, s_.target, s_.gains, pairs_);
            out.aux = u.value;
            if (u.clamped) out.events |= kEventClamp;
        }
        out.V = out.S + out.aux;
        return out;
    }

    const Vector& cost() const { return T_; }

private:
    const Scenario& s_;
    std::size_t n_;
    Vector tau_, T_, q_, mu_dot_;
    std::vector<ConjugatePair> pairs_;
};

// Sign pattern of rho (pi - pi*) + alpha mu; a change marks a branch switch.
std::uint64_t switch_pattern(const Scenario& s, std::span<const double> x) {
    std::uint64_t bits = 0;
    const std::size_t n = s.size();
    for (std::size_t k = 0; k < n && k < 64; ++k) {
        const double indicator = s.gains.rho * (x[k] - s.target[k]) + s.gains.alpha * x[n + k];
        if (indicator > 0.0) bits |= (std::uint64_t{1} << k);
    }
    return bits;
}

}  // namespace

std::size_t Scenario::steps_per_record() const {
    return integer_ratio(record_interval, step, "record interval / step");
}

std::size_t Scenario::record_count() const {
    return integer_ratio(horizon, record_interval, "horizon / record interval") + 1;
}

void Scenario::validate() const {
    logit.validate();
    const std::size_t n = logit.n;
    if (!(horizon > 0.0) || !(step > 0.0) || !(record_interval > 0.0) || !std::isfinite(horizon)) {
        throw std::invalid_argument("horizon, step and record interval must be positive");
    }
    steps_per_record();
    record_count();
    if (const std::size_t b = bias_size(bias); b != 0 && b != n) {
        throw std::invalid_argument("bias model size does not match the strategy count");
    }
    if (!pi0.empty()) {
        logit.require_size(pi0.size(), "initial population state");
        require_interior(pi0, "initial population state");
    }
    if (!target.empty()) {
        logit.require_size(target.size(), "target state");
        require_interior(target, "target state");
    }
    gains.validate(mechanism);
    if (!mu0.empty()) {
        logit.require_size(mu0.size(), "initial mechanism state");
        for (double m : mu0) {
            if (!std::isfinite(m)) throw std::invalid_argument("initial mu must be finite");
            if (mechanism == MechanismKind::saturated && m > 0.0) {
                throw std::invalid_argument("saturated mechanism needs mu(0) <= 0");
            }
        }
    }
    if (mechanism == MechanismKind::none) {
        if (!actual_cost.offset.empty()) logit.require_size(actual_cost.offset.size(), "cost offset");
        if (!actual_cost.waves.empty()) logit.require_size(actual_cost.waves.size(), "cost waves");
        for (double v : actual_cost.offset) {
            if (!std::isfinite(v)) throw std::invalid_argument("cost offset must be finite");
        }
    }
}

TrajectoryRecord run(const Scenario& input) {
    input.validate();
    TrajectoryRecord record;
    record.scenario = with_defaults(input);
    const Scenario& s = record.scenario;
    const std::size_t n = s.size();

    ClosedLoop loop(s);
    const std::size_t dim = loop.dimension();
    Vector x(dim), dx(dim), k1(dim), k2(dim), k3(dim), k4(dim), stage(dim);
    std::copy(s.pi0.begin(), s.pi0.end(), x.begin());
    if (dim > n) std::copy(s.mu0.begin(), s.mu0.end(), x.begin() + static_cast<long>(n));

    const std::size_t per_record = s.steps_per_record();
    const std::size_t records = s.record_count();
    const std::size_t total_steps = (records - 1) * per_record;
    const double h = s.step;
    record.samples.reserve(records);

    std::uint32_t pending = kEventNone;
    const bool saturated = s.mechanism == MechanismKind::saturated;
    std::uint64_t pattern = saturated ? switch_pattern(s, x) : 0;
    record.max_cost = -std::numeric_limits<double>::infinity();

    auto breach = [&](double t, const std::string& why) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "run aborted at t = " << t << ": " << why;
        throw RunAborted(msg.str(), record);
    };

    auto check_state = [&](double t) {
        double sum = 0.0, lowest = 1.0;
        for (std::size_t k = 0; k < dim; ++k) {
            if (!std::isfinite(x[k])) breach(t, "non-finite state");
        }
        for (std::size_t k = 0; k < n; ++k) {
            sum += x[k];
            lowest = std::min(lowest, x[k]);
        }
        record.min_share = std::min(record.min_share, lowest);
        const double drift = std::abs(sum - 1.0);
        record.max_simplex_drift = std::max(record.max_simplex_drift, drift);
        if (!(lowest > 0.0)) breach(t, "population state left the interior of the simplex");
        if (drift > kSimplexDriftTolerance) breach(t, "simplex sum drifted beyond 1e-7");
        loop.rates(t, x, dx);
        for (double c : loop.cost()) record.max_cost = std::max(record.max_cost, c);
        if (saturated) {
            for (std::size_t k = 0; k < n; ++k) {
                if (x[n + k] > kMuSignTolerance) breach(t, "saturated mechanism state mu > 0");
                if (!(loop.cost()[k] < s.gains.t_bar + s.gains.kappa)) {
                    breach(t, "actual cost reached Tbar + kappa");
                }
            }
        }
    };

    check_state(0.0);
    record.samples.push_back(loop.sample(0.0, x, dx));

    for (std::size_t i = 1; i <= total_steps; ++i) {
        const double t0 = static_cast<double>(i - 1) * h;
        loop.rates(t0, x, k1);
        for (std::size_t j = 0; j < dim; ++j) stage[j] = x[j] + 0.5 * h * k1[j];
        loop.rates(t0 + 0.5 * h, stage, k2);
        for (std::size_t j = 0; j < dim; ++j) stage[j] = x[j] + 0.5 * h * k2[j];
        loop.rates(t0 + 0.5 * h, stage, k3);
        for (std::size_t j = 0; j < dim; ++j) stage[j] = x[j] + h * k3[j];
        loop.rates(t0 + h, stage, k4);
        for (std::size_t j = 0; j < dim; ++j) {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        const double t = static_cast<double>(i) * h;
        check_state(t);
        if (saturated) {
            const auto next = switch_pattern(s, x);
            if (next != pattern) pending |= kEventModeSwitch;
            pattern = next;
        }
        if (i % per_record == 0) {
            auto sample = loop.sample(static_cast<double>(i / per_record) * s.record_interval, x, dx);
            sample.events |= pending;
            pending = kEventNone;
            record.samples.push_back(std::move(sample));
        }
    }
    return record;
}

ConvergenceResult detect_convergence(const TrajectoryRecord& traj, double epsilon, double window) {
    ConvergenceResult out;
    const auto& samples = traj.samples;
    if (samples.empty()) return out;
    const Vector& target = traj.scenario.target;
    out.final_error = distance(samples.back().pi, target);

    // Walk back to find where the error last exceeded epsilon.
    std::size_t first_inside = samples.size();
    for (std::size_t i = samples.size(); i-- > 0;) {
        if (distance(samples[i].pi, target) < epsilon) {
            first_inside = i;
        } else {
            break;
        }
    }
    if (first_inside == samples.size()) return out;
    out.time = samples[first_inside].t;
    const double window_start = samples.back().t - window;
    out.converged = out.time <= window_start + 1e-12;
    return out;
}

std::vector<SweepRow> gain_sweep(const Scenario& base, std::span<const double> kappa_values,
                                 const ConvergenceCriteria& criteria, unsigned threads) {
    std::vector<SweepRow> rows(kappa_values.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) {
            SweepRow& row = rows[i];
            row.kappa = kappa_values[i];
            Scenario scenario = base;
            scenario.gains.kappa = row.kappa;
            try {
                if (scenario.mechanism == MechanismKind::pi &&
                    std::holds_alternative<AdditiveBias>(scenario.bias)) {
                    row.condition_satisfied =
                        check_gain_condition(GainTheorem::pi_additive, scenario.bias, scenario.gains)
                            .satisfied;
                } else if (scenario.mechanism == MechanismKind::saturated &&
                           std::holds_alternative<MultiplicativeBias>(scenario.bias)) {
                    row.condition_satisfied =
                        check_gain_condition(GainTheorem::saturated_multiplicative, scenario.bias,
                                             scenario.gains)
                            .satisfied;
                }
                const auto traj = run(scenario);
                const auto conv = detect_convergence(traj, criteria.epsilon, criteria.window);
                row.converged = conv.converged;
                row.convergence_time = conv.time;
                row.final_error = conv.final_error;
                if (auto report = lyapunov_report_for(traj)) {
                    row.worst_residual = report->worst_violation;
                }
            } catch (const RunAborted& e) {
                row.aborted = true;
                row.abort_reason = e.what();
            } catch (const std::invalid_argument& e) {
                row.aborted = true;
                row.abort_reason = e.what();
            }
        }
    };

    const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(rows.size())));
    if (count <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < count; ++w) pool.emplace_back(worker);
    }
    return rows;
}

}  // namespace biaslogit
