#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mgrpo/vocab.hpp"

namespace mgrpo {

// Exponent clamp shared by the importance ratio and the KL estimator.
// Clamp events are surfaced in metrics as a training-health signal.
inline constexpr double kExpClampLo = -20.0;
inline constexpr double kExpClampHi = 20.0;

/// Per-(rollout, timestep) estimation record.
struct EstimateRecord {
    double t = 0.0;
    double l_theta = 0.0;
    double l_old = 0.0;
    double l_ref = 0.0;
    double rho = 1.0;
    double kl = 0.0;
    int masked_count = 0;
};

/// Importance ratio exp(l_theta - l_old), exponent clamped to +-20.
double importance(double l_theta, double l_old, int64_t* clamp_events = nullptr);

/// KL estimate exp(delta) - delta - 1 with delta = l_ref - l_theta.
/// Non-negative, zero iff delta is zero.
double kl_estimate(double l_ref, double l_theta, int64_t* clamp_events = nullptr);

/// Clipped surrogate term min(rho * A, clip(rho, 1-eps, 1+eps) * A).
double clipped_term(double rho, double advantage, double eps);

/// Loss evaluation on a masked view of a fixed completion; bound to one
/// policy. Returns the per-masked-token average log-probability.
using ViewLossFn = std::function<double(const MaskedView& view)>;

/// Monte-Carlo bound estimate: mean over nu masked views at t_j = j/nu of
/// the completion-length-scaled loss term. A draw that masks nothing is
/// resampled once and then skipped with a count adjustment.
struct ElboEstimate {
    int nu = 0;
    double value = 0.0;
    std::vector<double> terms;
    int skipped = 0;
};

ElboEstimate elbo_estimate(const ViewLossFn& loss, const TokenSeq& o, const Vocab& vocab, int nu, uint64_t seed);

}  // namespace mgrpo
