#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgrpo/vocab.hpp"

namespace mgrpo {

enum class ReverseMethod { ar_like, random };

std::string reverse_name(ReverseMethod m);
ReverseMethod reverse_from_name(const std::string& name);

/// How to re-mask a completed rollout for likelihood estimation.
/// Identical (method, ratio, seed, shape) always reproduces the identical
/// mask; that identity is what makes the three-policy loss comparisons
/// meaningful.
struct ReverseSpec {
    ReverseMethod method = ReverseMethod::random;
    double ratio = 1.0;  // expected masked fraction r
    uint64_t seed = 0;
};

/// Each non-prompt position masked independently with probability r.
MaskedView reverse_random(const TokenSeq& o, const ReverseSpec& spec, const Vocab& vocab);

/// Fading-out re-masking: keep-probability decays linearly from 2(1-r) at
/// the first completion token to 0 at the last, so the expected masked
/// count is exactly r * L_o. Requires r >= 0.5.
MaskedView reverse_ar_like(const TokenSeq& o, const ReverseSpec& spec, const Vocab& vocab);

MaskedView reverse(const TokenSeq& o, const ReverseSpec& spec, const Vocab& vocab);

/// Truncated timestep grid t_j = gamma + (1-gamma) * j / mu, j = 1..mu.
/// The last value is exactly 1.
struct TimestepGrid {
    double gamma = 0.0;
    int mu = 1;
    std::vector<double> values;
};

TimestepGrid timestep_grid(double gamma, int mu);

/// mu deterministic per-iteration seeds derived from a master seed.
std::vector<uint64_t> seed_set(uint64_t master_seed, int mu);

}  // namespace mgrpo
