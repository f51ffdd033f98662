#include "biaslogit/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace biaslogit {

namespace detail {

void softmax(std::span<const double> tau, double beta, std::span<double> out) {
    double lowest = tau[0];
    for (double v : tau) lowest = std::min(lowest, v);
    double total = 0.0;
    for (std::size_t k = 0; k < tau.size(); ++k) {
        out[k] = std::exp(-beta * (tau[k] - lowest));
        total += out[k];
    }
    for (double& v : out) v /= total;
}

double log_sum_exp_neg(std::span<const double> tau, double beta) {
    double lowest = tau[0];
    for (double v : tau) lowest = std::min(lowest, v);
    double total = 0.0;
    for (double v : tau) total += std::exp(-beta * (v - lowest));
    return -beta * lowest + std::log(total);
}

double entropy_term(std::span<const double> pi) {
    double s = 0.0;
    for (double p : pi) {
        if (p > 0.0) s += p * std::log(std::max(p, kLogFloor));
    }
    return s;
}

double storage(std::span<const double> tau, std::span<const double> pi, double eta, double beta) {
    return eta * (dot(pi, tau) + entropy_term(pi) / beta + log_sum_exp_neg(tau, beta) / beta);
}

}  // namespace detail

namespace {

void require_finite(const CostVector& tau) {
    for (double v : tau.values()) {
        if (!std::isfinite(v)) throw std::invalid_argument("cost vector has a non-finite entry");
    }
}

// Entropy-regularized linear objective minimized over the simplex.
double inner_objective(std::span<const double> w, std::span<const double> tau, double beta) {
    double value = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        value += w[k] * tau[k];
        if (w[k] > 0.0) value += w[k] * std::log(w[k]) / beta;
    }
    return value;
}

// Euclidean projection onto the probability simplex (sort-and-threshold).
void project_to_simplex(Vector& v) {
    Vector sorted = v;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        cumulative += sorted[j];
        const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (sorted[j] - candidate > 0.0) theta = candidate;
    }
    for (double& x : v) x = std::max(x - theta, 0.0);
}

void enumerate_grid(std::size_t n, int steps, Vector& point, std::size_t index, int remaining,
                    const std::function<void(const Vector&)>& visit) {
    if (index + 1 == n) {
        point[index] = static_cast<double>(remaining) / steps;
        visit(point);
        return;
    }
    for (int j = 0; j <= remaining; ++j) {
        point[index] = static_cast<double>(j) / steps;
        enumerate_grid(n, steps, point, index + 1, remaining - j, visit);
    }
}

constexpr int kProjectedGradientIterations = 200;
constexpr int kNewtonIterations = 200;

}  // namespace

PopulationState softmax_q(const CostVector& tau, const LogitParams& params) {
    params.validate();
    params.require_size(tau.size(), "cost vector");
    require_finite(tau);
    Vector out(tau.size());
    detail::softmax(tau.values(), params.beta, out);
    return PopulationState::unchecked(std::move(out));
}

Vector logit_vector_field(const PopulationState& pi, const CostVector& tau,
                          const LogitParams& params) {
    params.validate();
    params.require_size(pi.size(), "population state");
    params.require_size(tau.size(), "cost vector");
    Vector q(tau.size());
    detail::softmax(tau.values(), params.beta, q);
    for (std::size_t k = 0; k < q.size(); ++k) q[k] = params.eta * (q[k] - pi[k]);
    return q;
}

StorageSample storage_closed_form(const CostVector& tau, const PopulationState& pi,
                                  const LogitParams& params) {
    params.validate();
    params.require_size(pi.size(), "population state");
    params.require_size(tau.size(), "cost vector");
    return {detail::storage(tau.values(), pi.values(), params.eta, params.beta), 0.0};
}

StorageSample storage_brute_force(const CostVector& tau, const PopulationState& pi,
                                  const LogitParams& params, int grid_resolution) {
    params.validate();
    params.require_size(pi.size(), "population state");
    params.require_size(tau.size(), "cost vector");
    if (grid_resolution < 50) {
        throw std::invalid_argument("brute-force storage needs at least 50 grid points per axis");
    }
    const std::size_t n = tau.size();
    const double beta = params.beta;
    const auto costs = tau.values();

    Vector best(n);
    double best_value = std::numeric_limits<double>::infinity();
    Vector scratch(n);
    enumerate_grid(n, grid_resolution - 1, scratch, 0, grid_resolution - 1, [&](const Vector& w) {
        const double value = inner_objective(w, costs, beta);
        if (value < best_value) {
            best_value = value;
            best = w;
        }
    });

    auto gradient = [&](const Vector& w, Vector& g) {
        for (std::size_t k = 0; k < n; ++k) {
            g[k] = costs[k] + (1.0 + std::log(std::max(w[k], kLogFloor))) / beta;
        }
    };

    // Projected gradient with Armijo backtracking from the best grid point.
    Vector w = best;
    Vector g(n), trial(n);
    double value = best_value;
    for (int it = 0; it < kProjectedGradientIterations; ++it) {
        gradient(w, g);
        double step = 0.1 / beta;
        bool moved = false;
        for (int backtrack = 0; backtrack < 60; ++backtrack) {
            for (std::size_t k = 0; k < n; ++k) trial[k] = w[k] - step * g[k];
            project_to_simplex(trial);
            double decrease = 0.0;
            for (std::size_t k = 0; k < n; ++k) decrease += g[k] * (w[k] - trial[k]);
            const double trial_value = inner_objective(trial, costs, beta);
            if (trial_value <= value - 1e-4 * decrease) {
                moved = trial_value < value;
                w = trial;
                value = trial_value;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }

    // Newton polish on the affine hull; needs a strictly positive iterate.
    for (double& x : w) x = (1.0 - 1e-12) * x + 1e-12 / static_cast<double>(n);
    value = inner_objective(w, costs, beta);
    Vector direction(n);
    for (int it = 0; it < kNewtonIterations; ++it) {
        gradient(w, g);
        // Inverse Hessian is diag(beta * w); eliminate the multiplier of 1'd = 0.
        double weighted = 0.0, weight = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            weighted += beta * w[k] * g[k];
            weight += beta * w[k];
        }
        const double lambda = weighted / weight;
        double decrement = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            direction[k] = -beta * w[k] * (g[k] - lambda);
            decrement -= g[k] * direction[k];
        }
        if (decrement < 1e-30) break;
        double step = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (direction[k] < 0.0) step = std::min(step, -0.99 * w[k] / direction[k]);
        }
        bool accepted = false;
        for (int backtrack = 0; backtrack < 60; ++backtrack) {
            for (std::size_t k = 0; k < n; ++k) trial[k] = w[k] + step * direction[k];
            const double trial_value = inner_objective(trial, costs, beta);
            if (trial_value <= value - 0.25 * step * decrement) {
                w = trial;
                value = trial_value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }

    const double outer = dot(pi.values(), costs) + detail::entropy_term(pi.values()) / beta;
    return {params.eta * (outer - value), 0.0};
}

std::vector<StorageSample> radial_probe(const PopulationState& pi, const LogitParams& params,
                                        std::span<const double> gaps) {
    params.validate();
    params.require_size(pi.size(), "population state");
    const std::size_t n = pi.size();
    std::vector<StorageSample> samples;
    samples.reserve(gaps.size());
    Vector tau(n);
    for (double gap : gaps) {
        if (!std::isfinite(gap)) throw std::invalid_argument("probe gap must be finite");
        for (std::size_t k = 0; k < n; ++k) {
            tau[k] = gap * (0.5 - static_cast<double>(k) / static_cast<double>(n - 1));
        }
        samples.push_back({detail::storage(tau, pi.values(), params.eta, params.beta), gap});
    }
    return samples;
}

double radial_lower_bound(const PopulationState& pi, const LogitParams& params, double gap) {
    const auto values = pi.values();
    const double smallest = *std::min_element(values.begin(), values.end());
    return params.eta * (smallest * gap + detail::entropy_term(values) / params.beta);
}

}  // namespace biaslogit
