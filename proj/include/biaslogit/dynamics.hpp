#pragma once

#include <span>
#include <vector>

#include "biaslogit/types.hpp"

namespace biaslogit {

/// Logit choice map: Q_k(tau) = exp(-beta tau_k) / sum_l exp(-beta tau_l).
/// Evaluated with a max-shift so that beta * tau up to ~1e3 does not overflow.
PopulationState softmax_q(const CostVector& tau, const LogitParams& params);

/// Logit dynamics velocity eta * (Q(tau) - pi). Entries sum to zero.
Vector logit_vector_field(const PopulationState& pi, const CostVector& tau,
                          const LogitParams& params);

/// Closed-form storage of the logit dynamics,
///   S = eta * (pi'tau + (1/beta) sum pi_l log pi_l + (1/beta) log sum exp(-beta tau_l)).
/// Nonnegative, and zero exactly when pi = Q(tau).
StorageSample storage_closed_form(const CostVector& tau, const PopulationState& pi,
                                  const LogitParams& params);

/// Same storage, but with the inner entropy-regularized minimization over the
/// simplex solved numerically: exhaustive grid search with `grid_resolution`
/// points per axis, then projected-gradient and Newton refinement from the
/// best grid point. Intended as an independent check of the closed form.
StorageSample storage_brute_force(const CostVector& tau, const PopulationState& pi,
                                  const LogitParams& params, int grid_resolution = 50);

/// Storage at a fixed pi for costs spread linearly from +gap/2 (strategy 1)
/// down to -gap/2 (strategy n). Each sample's `t` holds the gap.
std::vector<StorageSample> radial_probe(const PopulationState& pi, const LogitParams& params,
                                        std::span<const double> gaps);

/// Lower bound eta * (min_k pi_k * gap + (1/beta) sum pi_l log pi_l) that the
/// storage must respect for any cost spread of `gap`.
double radial_lower_bound(const PopulationState& pi, const LogitParams& params, double gap);

namespace detail {

// Unvalidated kernels shared with the integrator.
void softmax(std::span<const double> tau, double beta, std::span<double> out);
double log_sum_exp_neg(std::span<const double> tau, double beta);
double entropy_term(std::span<const double> pi);  // sum pi log pi, clamped at kLogFloor
double storage(std::span<const double> tau, std::span<const double> pi, double eta, double beta);

}  // namespace detail

}  // namespace biaslogit
