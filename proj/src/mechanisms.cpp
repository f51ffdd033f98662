#include "biaslogit/mechanisms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace biaslogit {

void MechanismGains::validate(MechanismKind kind) const {
    if (kind == MechanismKind::none) return;
    if (!(rho > 0.0) || !std::isfinite(rho)) {
        throw std::invalid_argument("mechanism gain rho must be positive");
    }
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
        throw std::invalid_argument("mechanism gain kappa must be positive");
    }
    if (kind == MechanismKind::saturated) {
        if (!(alpha * 2.0 * kappa > 1.0) || !std::isfinite(alpha)) {
            throw std::invalid_argument("saturated mechanism needs alpha > 1 / (2 kappa)");
        }
        if (!(t_bar > 0.0) || !std::isfinite(t_bar)) {
            throw std::invalid_argument("saturated mechanism needs a positive base cost t_bar");
        }
    }
}

namespace detail {

void pi_mechanism(std::span<const double> mu, std::span<const double> pi,
                  std::span<const double> pi_star, const MechanismGains& g,
                  std::span<double> mu_dot, std::span<double> T) {
    for (std::size_t k = 0; k < pi.size(); ++k) {
        const double error = pi[k] - pi_star[k];
        mu_dot[k] = g.rho * error;
        T[k] = mu[k] + g.kappa * error;
    }
}

void saturated_mechanism(std::span<const double> mu, std::span<const double> pi,
                         std::span<const double> pi_star, const MechanismGains& g,
                         std::span<double> mu_dot, std::span<double> T) {
    for (std::size_t k = 0; k < pi.size(); ++k) {
        const double error = pi[k] - pi_star[k];
        mu_dot[k] = std::min(g.rho * error, -g.alpha * mu[k]);
        T[k] = g.t_bar + mu[k] + g.kappa * error;
    }
}

BregmanStorage bregman_storage(std::span<const double> mu, std::span<const double> pi,
                               std::span<const double> pi_star, const MechanismGains& g,
                               std::span<const ConjugatePair> pairs) {
    BregmanStorage out;
    for (std::size_t k = 0; k < pi.size(); ++k) {
        double arg = std::min(pi[k], pi_star[k] - (g.alpha / g.rho) * mu[k]);
        if (arg < 0.0 || arg > 1.0) {
            arg = std::clamp(arg, 0.0, 1.0);
            out.clamped = true;
        }
        const auto& pair = pairs[k];
        const double zeta = pair.primitive_grad(arg);
        const double zeta_star = pair.primitive_grad(pi_star[k]);
        out.value += g.rho * (pair.conjugate_value(zeta) - pair.conjugate_value(zeta_star) -
                              (zeta - zeta_star) * pi_star[k]);
    }
    return out;
}

}  // namespace detail

namespace {

void require_sizes(const MechanismState& state, const PopulationState& pi,
                   const TargetState& target) {
    if (state.mu.size() != pi.size() || target.pi_star.size() != pi.size()) {
        throw std::invalid_argument("mechanism state, population and target sizes differ");
    }
}

// 8-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 8> kGaussNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGaussWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

}  // namespace

MechanismOutput mech1_step(const MechanismState& state, const PopulationState& pi,
                           const TargetState& target) {
    require_sizes(state, pi, target);
    state.gains.validate(MechanismKind::pi);
    Vector mu_dot(pi.size()), T(pi.size());
    detail::pi_mechanism(state.mu, pi.values(), target.pi_star.values(), state.gains, mu_dot, T);
    return {std::move(mu_dot), CostVector(std::move(T))};
}

MechanismOutput mech2_step(const MechanismState& state, const PopulationState& pi,
                           const TargetState& target) {
    require_sizes(state, pi, target);
    state.gains.validate(MechanismKind::saturated);
    for (std::size_t k = 0; k < state.mu.size(); ++k) {
        if (state.mu[k] > kMuSignTolerance) {
            std::ostringstream msg;
            msg << "saturated mechanism state mu[" << k << "] = " << state.mu[k] << " is positive";
            throw InvariantViolation(msg.str());
        }
    }
    Vector mu_dot(pi.size()), T(pi.size());
    detail::saturated_mechanism(state.mu, pi.values(), target.pi_star.values(), state.gains,
                                mu_dot, T);
    return {std::move(mu_dot), CostVector(std::move(T))};
}

double storage_h(const PopulationState& pi, const TargetState& target, double rho) {
    if (target.pi_star.size() != pi.size()) {
        throw std::invalid_argument("population and target sizes differ");
    }
    const double d = distance(pi.values(), target.pi_star.values());
    return 0.5 * rho * d * d;
}

ConjugatePair::ConjugatePair(BiasCurve weight) : weight_(std::move(weight)) {
    if (!(weight_.min_value() > 0.0)) {
        throw std::invalid_argument("conjugate pair needs a positive weight on [0, 1]");
    }
    if (weight_.is_affine()) return;

    const int m = kGridPoints;
    Vector x(m), grad(m), value(m), w(m);
    double first = 0.0;   // int_0^x w
    double moment = 0.0;  // int_0^x theta w(theta)
    for (int i = 0; i < m; ++i) {
        x[i] = static_cast<double>(i) / (m - 1);
        if (i > 0) {
            const double a = x[i - 1], b = x[i];
            const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
            for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
                const double theta = mid + half * kGaussNodes[q];
                const double wt = half * kGaussWeights[q] * weight_.value(theta);
                first += wt;
                moment += wt * theta;
            }
        }
        w[i] = weight_.value(x[i]);
        grad[i] = first;
        value[i] = x[i] * first - moment;
    }
    grad_table_ = CubicHermite(x, grad, std::move(w));
    value_table_ = CubicHermite(std::move(x), std::move(value), std::move(grad));
}

double ConjugatePair::primitive(double x) const {
    x = std::clamp(x, 0.0, 1.0);
    if (const auto* a = std::get_if<AffineCurve>(&weight_.definition())) {
        return a->intercept * x * x / 2.0 - a->slope * x * x * x / 6.0;
    }
    return value_table_.value(x);
}

double ConjugatePair::primitive_grad(double x) const {
    x = std::clamp(x, 0.0, 1.0);
    if (const auto* a = std::get_if<AffineCurve>(&weight_.definition())) {
        return a->intercept * x - a->slope * x * x / 2.0;
    }
    return grad_table_.value(x);
}

double ConjugatePair::primitive_hess(double x) const {
    x = std::clamp(x, 0.0, 1.0);
    if (weight_.is_affine()) return weight_.value(x);
    return grad_table_.derivative(x);
}

double ConjugatePair::conjugate_grad(double zeta) const {
    if (!std::isfinite(zeta)) throw std::invalid_argument("conjugate argument must be finite");
    const double g0 = primitive_grad(0.0), g1 = primitive_grad(1.0);
    if (zeta <= g0) return 0.0;
    if (zeta >= g1) return 1.0;
    // Safeguarded Newton; F' is strictly increasing with slope >= w^L.
    double lo = 0.0, hi = 1.0;
    double x = (zeta - g0) / (g1 - g0);
    for (int it = 0; it < 100; ++it) {
        const double residual = primitive_grad(x) - zeta;
        if (residual > 0.0) {
            hi = x;
        } else {
            lo = x;
        }
        double next = x - residual / primitive_hess(x);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) < 1e-12 || hi - lo < 1e-15) {
            x = next;
            break;
        }
        x = next;
    }
    return x;
}

double ConjugatePair::conjugate_value(double zeta) const {
    const double x = conjugate_grad(zeta);
    return zeta * x - primitive(x);
}

double conjugate_grad(const ConjugatePair& pair, double zeta) { return pair.conjugate_grad(zeta); }

double conjugate_value(const ConjugatePair& pair, double zeta) {
    return pair.conjugate_value(zeta);
}

std::vector<ConjugatePair> make_conjugate_pairs(const MultiplicativeBias& bias) {
    std::vector<ConjugatePair> pairs;
    pairs.reserve(bias.size());
    for (const auto& curve : bias.curves()) pairs.emplace_back(curve);
    return pairs;
}

BregmanStorage storage_u_detailed(const MechanismState& state, const PopulationState& pi,
                                  const TargetState& target,
                                  std::span<const ConjugatePair> pairs) {
    require_sizes(state, pi, target);
    if (pairs.size() != pi.size()) {
        throw std::invalid_argument("one conjugate pair per strategy is required");
    }
    for (double m : state.mu) {
        if (m > kMuSignTolerance) throw InvariantViolation("storage U needs mu <= 0");
    }
    return detail::bregman_storage(state.mu, pi.values(), target.pi_star.values(), state.gains,
                                   pairs);
}

double storage_u(const MechanismState& state, const PopulationState& pi,
                 const TargetState& target, std::span<const ConjugatePair> pairs) {
    return storage_u_detailed(state, pi, target, pairs).value;
}

GainVerdict check_gain_condition(GainTheorem theorem, const BiasModel& bias,
                                 const MechanismGains& gains) {
    GainVerdict v;
    if (!(gains.kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
    switch (theorem) {
        case GainTheorem::pi_additive: {
            const auto* additive = std::get_if<AdditiveBias>(&bias);
            if (additive == nullptr) {
                throw std::invalid_argument(
                    "the PI-mechanism gain condition applies to the additive bias model only");
            }
            v.threshold = additive->c_high();
            v.min_kappa = v.threshold;
            v.margin = gains.kappa - v.threshold;
            v.satisfied = gains.kappa > v.threshold;
            return v;
        }
        case GainTheorem::saturated_multiplicative: {
            const auto* mult = std::get_if<MultiplicativeBias>(&bias);
            if (mult == nullptr) {
                throw std::invalid_argument(
                    "the saturated-mechanism gain condition applies to the multiplicative bias "
                    "model only");
            }
            const double wl = mult->w_low(), vh = mult->v_high();
            v.t_max = gains.t_bar + gains.kappa;
            v.threshold = 2.0 * vh * v.t_max / wl;
            v.margin = gains.kappa - v.threshold;
            v.feasible = wl > 2.0 * vh;
            v.min_kappa = v.feasible ? 2.0 * vh * gains.t_bar / (wl - 2.0 * vh)
                                     : std::numeric_limits<double>::infinity();
            v.alpha_ok = gains.alpha * 2.0 * gains.kappa > 1.0;
            v.satisfied = v.feasible && gains.kappa * wl > 2.0 * vh * v.t_max && v.alpha_ok;
            return v;
        }
    }
    throw std::invalid_argument("unknown gain theorem");
}

}  // namespace biaslogit
