#pragma once

#include <functional>
#include <map>
#include <vector>

#include "mgrpo/model.hpp"
#include "mgrpo/params.hpp"
#include "mgrpo/sampler.hpp"
#include "mgrpo/vocab.hpp"

namespace mgrpo {

/// Limits for the brute-force references. Enumeration beyond these sizes
/// is rejected rather than attempted.
struct EnumerationBudget {
    int max_len = 4;
    int max_vocab = 6;
    int t_resolution = 256;
    double max_paths = 1e6;
};

/// log of the probability that the uniform-order one-token-per-step
/// reverse process produces exactly this completion: sum over all L!
/// unmask orders of (1/L!) times the stepwise token probabilities.
/// Token draws use the sampler's mask-excluded distribution at
/// temperature 1.
double exact_anyorder_loglik(const Policy& policy, const TokenSeq& o, const Vocab& vocab,
                             const EnumerationBudget& budget = {});

/// High-precision value of the likelihood bound: all 2^L mask patterns
/// enumerated with their time-dependent weights, midpoint-rule integration
/// over t at the budget's resolution. Uses the same full-vocabulary
/// log-probabilities as the training loss.
double exact_elbo(const Policy& policy, const TokenSeq& o, const Vocab& vocab, int t_resolution = 256,
                  const EnumerationBudget& budget = {});

/// Exact expectation of the Monte-Carlo bound estimator at grid j/nu,
/// including its resample-once-then-skip handling of empty masks.
double exact_estimator_mean(const Policy& policy, const TokenSeq& o, const Vocab& vocab, int nu,
                            const EnumerationBudget& budget = {});

/// Exact output distribution of a sampler by enumeration of every
/// stochastic branch. Supports emerge and exact_one_step.
std::map<std::vector<int32_t>, double> enumerate_sampler_dist(const Policy& policy, const TokenSeq& prompt,
                                                              const Vocab& vocab, const SamplerConfig& cfg,
                                                              const EnumerationBudget& budget = {});

double total_variation(const std::map<std::vector<int32_t>, double>& a,
                       const std::map<std::vector<int32_t>, double>& b);

/// Central finite differences in 64-bit accumulation. The objective thunk
/// must be deterministic.
GradVec<double> finite_diff_grad(const std::function<double(const ParamSet<double>&)>& objective,
                                 const ParamSet<double>& params, double step);

/// Largest relative gradient error max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
double max_relative_error(const GradVec<double>& a, const GradVec<double>& b, double floor = 1e-6);

}  // namespace mgrpo
