#pragma once

#include <vector>

#include "biaslogit/types.hpp"

namespace biaslogit {

/// Piecewise cubic Hermite interpolant on strictly increasing knots.
/// Evaluation clamps to the knot range.
class CubicHermite {
public:
    CubicHermite() = default;
    CubicHermite(Vector knots, Vector values, Vector slopes);

    /// Fritsch-Carlson style shape-preserving slopes (weighted harmonic mean
    /// of adjacent secants, secant slopes at the two ends).
    static CubicHermite monotone(Vector knots, Vector values);

    double value(double x) const;
    double derivative(double x) const;

    const Vector& knots() const noexcept { return x_; }
    const Vector& values() const noexcept { return y_; }
    bool empty() const noexcept { return x_.empty(); }

private:
    std::size_t interval(double x) const;

    Vector x_, y_, d_;
};

}  // namespace biaslogit
