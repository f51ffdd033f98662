#include "biaslogit/types.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace biaslogit {

PopulationState::PopulationState(Vector pi) : pi_(std::move(pi)) {
    if (pi_.size() < 2) {
        throw std::invalid_argument("population state needs at least two strategies");
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < pi_.size(); ++k) {
        const double p = pi_[k];
        if (!std::isfinite(p) || p <= 0.0 || p >= 1.0) {
            std::ostringstream msg;
            msg << "population state entry " << k << " = " << p << " is not in (0, 1)";
            throw std::invalid_argument(msg.str());
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > kSimplexSumTolerance) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "population state sums to " << sum << ", expected 1";
        throw std::invalid_argument(msg.str());
    }
}

PopulationState PopulationState::unchecked(Vector pi) {
    return PopulationState(std::move(pi), Unchecked{});
}

PopulationState PopulationState::uniform(std::size_t n) {
    if (n < 2) {
        throw std::invalid_argument("population state needs at least two strategies");
    }
    return PopulationState(Vector(n, 1.0 / static_cast<double>(n)), Unchecked{});
}

CostVector::CostVector(Vector values) : values_(std::move(values)) {
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (!std::isfinite(values_[k])) {
            std::ostringstream msg;
            msg << "cost entry " << k << " is not finite";
            throw std::invalid_argument(msg.str());
        }
    }
}

void LogitParams::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) {
        throw std::invalid_argument("logit update rate eta must be positive");
    }
    if (!(beta > 0.0) || !std::isfinite(beta)) {
        throw std::invalid_argument("logit inverse noise beta must be positive");
    }
    if (n < 2) {
        throw std::invalid_argument("logit dynamics needs at least two strategies");
    }
}

void LogitParams::require_size(std::size_t size, const char* what) const {
    if (size != n) {
        std::ostringstream msg;
        msg << what << " has " << size << " entries, expected " << n;
        throw std::invalid_argument(msg.str());
    }
}

bool DiagonalMatrix::negative_definite() const {
    for (double d : diagonal) {
        if (!(d < 0.0)) return false;
    }
    return !diagonal.empty();
}

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace biaslogit
