#pragma once

#include <span>
#include <vector>

#include "biaslogit/bias.hpp"
#include "biaslogit/types.hpp"

namespace biaslogit {

enum class MechanismKind {
    none,
    pi,         // mu' = rho (pi - pi*), T = mu + kappa (pi - pi*)
    saturated,  // mu' = min{rho (pi - pi*), -alpha mu}, T = Tbar 1 + mu + kappa (pi - pi*)
};

struct MechanismGains {
    double rho = 1.0;
    double kappa = 1.0;
    double alpha = 1.0;  // saturated only; must exceed 1 / (2 kappa)
    double t_bar = 1.0;  // saturated only

    void validate(MechanismKind kind) const;
};

/// Integrator state mu plus gains. For the saturated mechanism mu <= 0.
struct MechanismState {
    Vector mu;
    MechanismGains gains;
};

struct TargetState {
    PopulationState pi_star;
};

struct MechanismOutput {
    Vector mu_dot;
    CostVector T;
};

/// Tolerance on mu <= 0 for the saturated mechanism.
inline constexpr double kMuSignTolerance = 1e-12;

MechanismOutput mech1_step(const MechanismState& state, const PopulationState& pi,
                           const TargetState& target);

/// Throws InvariantViolation when mu has a positive entry.
MechanismOutput mech2_step(const MechanismState& state, const PopulationState& pi,
                           const TargetState& target);

/// H(pi) = (rho/2) ||pi - pi*||^2.
double storage_h(const PopulationState& pi, const TargetState& target, double rho);

/// Primitive F(x) = int_0^x int_0^phi w(theta) dtheta dphi of a positive bias
/// weight w on [0, 1] (infinite outside), together with its convex conjugate.
///
/// Affine weights use closed forms. Other weights are integrated once onto a
/// 2048-point grid (Gauss-Legendre per cell) and interpolated by cubic Hermite
/// pieces whose knot slopes are the exact lower-order derivative, so that the
/// second derivative of F tracks w closely.
class ConjugatePair {
public:
    static constexpr int kGridPoints = 2048;

    explicit ConjugatePair(BiasCurve weight);

    double weight(double x) const { return weight_.value(x); }
    double primitive(double x) const;       // F
    double primitive_grad(double x) const;  // F'
    double primitive_hess(double x) const;  // F'' (interpolant derivative on the grid path)

    /// Inverse of F' on [0, 1]; arguments outside [F'(0), F'(1)] map to the
    /// nearest end of the interval, which is the exact conjugate gradient of
    /// an F that is infinite outside [0, 1].
    double conjugate_grad(double zeta) const;
    /// F*(zeta) = zeta x - F(x) at x = conjugate_grad(zeta).
    double conjugate_value(double zeta) const;

    const BiasCurve& curve() const noexcept { return weight_; }

private:
    BiasCurve weight_;
    CubicHermite grad_table_;   // F'
    CubicHermite value_table_;  // F
};

double conjugate_grad(const ConjugatePair& pair, double zeta);
double conjugate_value(const ConjugatePair& pair, double zeta);

std::vector<ConjugatePair> make_conjugate_pairs(const MultiplicativeBias& bias);

struct BregmanStorage {
    double value = 0.0;
    bool clamped = false;  // a min-argument left [0, 1] and was clamped
};

/// U = sum_k rho (F*(zeta_k) - F*(zeta*_k) - (zeta_k - zeta*_k) pi*_k) with
/// zeta_k = F'(min{pi_k, pi*_k - (alpha/rho) mu_k}) and zeta*_k = F'(pi*_k).
BregmanStorage storage_u_detailed(const MechanismState& state, const PopulationState& pi,
                                  const TargetState& target,
                                  std::span<const ConjugatePair> pairs);
double storage_u(const MechanismState& state, const PopulationState& pi,
                 const TargetState& target, std::span<const ConjugatePair> pairs);

enum class GainTheorem {
    pi_additive = 1,              // PI mechanism on the additive model: kappa > c^H
    saturated_multiplicative = 2  // saturated mechanism on the multiplicative model
};

struct GainVerdict {
    bool satisfied = false;
    bool feasible = true;    // false when no kappa can satisfy the condition
    bool alpha_ok = true;    // alpha > 1 / (2 kappa); saturated mechanism only
    double threshold = 0.0;  // right-hand side evaluated at the given kappa
    double margin = 0.0;     // kappa - threshold
    double min_kappa = 0.0;  // smallest kappa satisfying the condition (when feasible)
    double t_max = 0.0;      // structural cost bound used (saturated only)
};

/// Sufficient gain conditions for convergence to the target. For the
/// saturated mechanism the cost bound is the structural Tbar + kappa, which
/// turns the condition into kappa w^L > 2 v^H (Tbar + kappa).
GainVerdict check_gain_condition(GainTheorem theorem, const BiasModel& bias,
                                 const MechanismGains& gains);

namespace detail {

void pi_mechanism(std::span<const double> mu, std::span<const double> pi,
                  std::span<const double> pi_star, const MechanismGains& g,
                  std::span<double> mu_dot, std::span<double> T);
void saturated_mechanism(std::span<const double> mu, std::span<const double> pi,
                         std::span<const double> pi_star, const MechanismGains& g,
                         std::span<double> mu_dot, std::span<double> T);
BregmanStorage bregman_storage(std::span<const double> mu, std::span<const double> pi,
                               std::span<const double> pi_star, const MechanismGains& g,
                               std::span<const ConjugatePair> pairs);

}  // namespace detail

}  // namespace biaslogit
