#include "biaslogit/interpolation.hpp"

#include <algorithm>
#include <cmath>

namespace biaslogit {

CubicHermite::CubicHermite(Vector knots, Vector values, Vector slopes)
    : x_(std::move(knots)), y_(std::move(values)), d_(std::move(slopes)) {
    if (x_.size() < 2 || y_.size() != x_.size() || d_.size() != x_.size()) {
        throw std::invalid_argument("cubic interpolant needs >= 2 knots with matching values");
    }
    for (std::size_t i = 1; i < x_.size(); ++i) {
        if (!(x_[i] > x_[i - 1])) {
            throw std::invalid_argument("interpolation knots must be strictly increasing");
        }
    }
}

CubicHermite CubicHermite::monotone(Vector knots, Vector values) {
    const std::size_t m = knots.size();
    if (m < 2 || values.size() != m) {
        throw std::invalid_argument("monotone interpolant needs >= 2 knots with matching values");
    }
    Vector secant(m - 1), width(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i) {
        width[i] = knots[i + 1] - knots[i];
        if (!(width[i] > 0.0)) {
            throw std::invalid_argument("interpolation knots must be strictly increasing");
        }
        secant[i] = (values[i + 1] - values[i]) / width[i];
    }
    Vector slopes(m);
    slopes.front() = secant.front();
    slopes.back() = secant.back();
    for (std::size_t i = 1; i + 1 < m; ++i) {
        const double a = secant[i - 1], b = secant[i];
        if (a * b <= 0.0) {
            slopes[i] = 0.0;
            continue;
        }
        const double w1 = 2.0 * width[i] + width[i - 1];
        const double w2 = width[i] + 2.0 * width[i - 1];
        slopes[i] = (w1 + w2) / (w1 / a + w2 / b);
    }
    return CubicHermite(std::move(knots), std::move(values), std::move(slopes));
}

std::size_t CubicHermite::interval(double x) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const auto idx = static_cast<std::size_t>(std::distance(x_.begin(), it));
    return std::clamp<std::size_t>(idx, 1, x_.size() - 1) - 1;
}

double CubicHermite::value(double x) const {
    x = std::clamp(x, x_.front(), x_.back());
    const std::size_t i = interval(x);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * d_[i] +
           (-2 * t3 + 3 * t2) * y_[i + 1] + (t3 - t2) * h * d_[i + 1];
}

double CubicHermite::derivative(double x) const {
    x = std::clamp(x, x_.front(), x_.back());
    const std::size_t i = interval(x);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * y_[i] + (-6 * t2 + 6 * t) * y_[i + 1]) / h +
           (3 * t2 - 4 * t + 1) * d_[i] + (3 * t2 - 2 * t) * d_[i + 1];
}

}  // namespace biaslogit
