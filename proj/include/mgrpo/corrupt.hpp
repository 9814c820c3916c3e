#pragma once

#include <cstdint>

#include "mgrpo/schedule.hpp"
#include "mgrpo/vocab.hpp"

namespace mgrpo {

/// Forward corruption: every non-prompt position independently keeps its
/// token with probability alpha(t), otherwise becomes the mask id. Prompt
/// positions are untouched. Deterministic per seed; t must lie in (0,1].
MaskedView corrupt(const TokenSeq& x0, double t, const NoiseSchedule& schedule, const Vocab& vocab, uint64_t seed);

}  // namespace mgrpo
