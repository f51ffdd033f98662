#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "biaslogit/interpolation.hpp"
#include "biaslogit/types.hpp"

namespace biaslogit {

/// Number of samples used to verify the monotonicity and bound assumptions of
/// a bias curve at construction.
inline constexpr int kAssumptionSamples = 10000;

/// f(x) = intercept - slope * x
struct AffineCurve {
    double intercept = 1.0;
    double slope = 1.0;
};

/// f(x) = intercept - linear_slope * x - amplitude * (3x^2 - 2x^3).
/// Derivative ranges over [-(linear_slope + 1.5 amplitude), -linear_slope].
struct SmoothstepCurve {
    double intercept = 1.0;
    double linear_slope = 0.5;
    double amplitude = 0.5;
};

/// Monotone cubic interpolation of sampled (x, value) points covering [0, 1].
struct TabulatedCurve {
    Vector x;
    Vector y;
    std::string source;  // CSV path, empty when given inline
};

/// Scalar, strictly decreasing function on [0, 1] describing how one
/// strategy's perceived cost (or cost weight) depends on its own share.
///
/// Bounds are computed at construction (exactly for the closed-form families,
/// from the interpolant for tabulated data) and then verified on a dense grid;
/// a curve that is not strictly decreasing is rejected.
class BiasCurve {
public:
    using Definition = std::variant<AffineCurve, SmoothstepCurve, TabulatedCurve>;

    explicit BiasCurve(Definition definition);

    static BiasCurve affine(double intercept, double slope);
    static BiasCurve smoothstep(double intercept, double linear_slope, double amplitude);
    static BiasCurve tabulated(Vector x, Vector y);
    /// Two-column CSV (x, value); an optional non-numeric header row is skipped.
    static BiasCurve from_csv(const std::filesystem::path& path);

    double value(double x) const;
    double derivative(double x) const;

    double min_value() const noexcept { return min_value_; }
    double max_value() const noexcept { return max_value_; }
    /// Bounds on |f'| over (0, 1).
    /// Bounds on -f'(x), so both are positive for an admissible curve.
    double min_slope() const noexcept { return min_slope_; }
    double max_slope() const noexcept { return max_slope_; }

    const Definition& definition() const noexcept { return definition_; }
    bool is_affine() const noexcept { return std::holds_alternative<AffineCurve>(definition_); }

private:
    void compute_bounds();
    void verify_bounds() const;

    Definition definition_;
    CubicHermite table_;
    double min_value_ = 0.0, max_value_ = 0.0;
    double min_slope_ = 0.0, max_slope_ = 0.0;
};

/// Additive conformity bias tau = T + B(pi), B_k = b_k(pi_k).
class AdditiveBias {
public:
    explicit AdditiveBias(std::vector<BiasCurve> curves);
    static AdditiveBias uniform(std::size_t n, const BiasCurve& curve);

    std::size_t size() const noexcept { return curves_.size(); }
    const std::vector<BiasCurve>& curves() const noexcept { return curves_; }

    double b_low() const noexcept { return b_low_; }
    double b_high() const noexcept { return b_high_; }
    double c_low() const noexcept { return c_low_; }
    double c_high() const noexcept { return c_high_; }

private:
    std::vector<BiasCurve> curves_;
    double b_low_, b_high_, c_low_, c_high_;
};

/// Multiplicative conformity bias tau = W(pi) T, W = diag(w_k(pi_k)), w_k > 0.
class MultiplicativeBias {
public:
    explicit MultiplicativeBias(std::vector<BiasCurve> curves);
    static MultiplicativeBias uniform(std::size_t n, const BiasCurve& curve);

    std::size_t size() const noexcept { return curves_.size(); }
    const std::vector<BiasCurve>& curves() const noexcept { return curves_; }

    double w_low() const noexcept { return w_low_; }
    double w_high() const noexcept { return w_high_; }
    double v_low() const noexcept { return v_low_; }
    double v_high() const noexcept { return v_high_; }

private:
    std::vector<BiasCurve> curves_;
    double w_low_, w_high_, v_low_, v_high_;
};

/// No bias (tau = T), or one of the two conformity models.
using BiasModel = std::variant<std::monostate, AdditiveBias, MultiplicativeBias>;

/// B(pi); the caller adds the actual cost.
CostVector bias_additive(const AdditiveBias& bias, const PopulationState& pi);
/// B'(pi) = diag(b_k'(pi_k)); negative definite.
DiagonalMatrix bias_additive_jacobian(const AdditiveBias& bias, const PopulationState& pi);

/// tau_k = w_k(pi_k) T_k.
CostVector bias_multiplicative(const MultiplicativeBias& bias, const PopulationState& pi,
                               const CostVector& T);
/// W(pi) and W'(pi).
DiagonalMatrix bias_weights(const MultiplicativeBias& bias, const PopulationState& pi);
DiagonalMatrix bias_multiplicative_jacobian(const MultiplicativeBias& bias,
                                            const PopulationState& pi);
/// Phi(T, pi) = -W'(pi) diag(T).
DiagonalMatrix phi_matrix(const MultiplicativeBias& bias, const PopulationState& pi,
                          const CostVector& T);

/// Impact coefficient of the additive model: the maximal bias strength c^H.
double shortage_coefficient_model1(const AdditiveBias& bias);
/// Impact coefficient of the multiplicative model for costs bounded by
/// t_max: v^H t_max / (w^L)^2.
double shortage_coefficient_model2(const MultiplicativeBias& bias, double t_max);

}  // namespace biaslogit
