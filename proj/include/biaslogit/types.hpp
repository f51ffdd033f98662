#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace biaslogit {

using Vector = std::vector<double>;

// Tolerances shared by the state types and the integrator.
inline constexpr double kSimplexSumTolerance = 1e-9;
inline constexpr double kLogFloor = 1e-12;

/// Raised when a runtime invariant of the model is breached (as opposed to a
/// malformed argument, which raises std::invalid_argument).
class InvariantViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Point in the relative interior of the probability simplex.
class PopulationState {
public:
    explicit PopulationState(Vector pi);

    /// Skips validation; for integrator stages and other internal callers
    /// that track the invariants themselves.
    static PopulationState unchecked(Vector pi);

    std::size_t size() const noexcept { return pi_.size(); }
    double operator[](std::size_t k) const { return pi_[k]; }
    std::span<const double> values() const noexcept { return pi_; }
    const Vector& vector() const noexcept { return pi_; }

    static PopulationState uniform(std::size_t n);

private:
    struct Unchecked {};
    PopulationState(Vector pi, Unchecked) : pi_(std::move(pi)) {}

    Vector pi_;
};

/// Cost per strategy. Used for both the actual cost T and the biased cost tau.
class CostVector {
public:
    explicit CostVector(Vector values);

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t k) const { return values_[k]; }
    std::span<const double> values() const noexcept { return values_; }
    const Vector& vector() const noexcept { return values_; }

private:
    Vector values_;
};

struct LogitParams {
    double eta = 1.0;   // update rate
    double beta = 1.0;  // inverse noise level
    std::size_t n = 2;  // strategy count

    void validate() const;
    void require_size(std::size_t size, const char* what) const;
};

/// A storage function evaluation. `t` is the time stamp (or, for probes, the
/// swept parameter).
struct StorageSample {
    double value = 0.0;
    double t = 0.0;
};

struct DiagonalMatrix {
    Vector diagonal;

    std::size_t size() const noexcept { return diagonal.size(); }
    double operator[](std::size_t k) const { return diagonal[k]; }
    bool negative_definite() const;
};

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double distance(std::span<const double> a, std::span<const double> b);

}  // namespace biaslogit
