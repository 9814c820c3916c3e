#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgrpo/model.hpp"
#include "mgrpo/schedule.hpp"
#include "mgrpo/vocab.hpp"

namespace mgrpo {

enum class SamplerKind { semi_ar, emerge, maskgit, exact_one_step };

std::string sampler_name(SamplerKind kind);
SamplerKind sampler_from_name(const std::string& name);

struct SamplerConfig {
    SamplerKind kind = SamplerKind::semi_ar;
    int completion_len = 8;   // L
    int block_len = 8;        // semi_ar: L_block, must divide L
    int tokens_per_step = 2;  // semi_ar: s, must divide L_block
    int steps = 8;            // emerge / maskgit: K
    NoiseSchedule schedule;   // emerge reverse rule
    double temperature = 1.0;  // 0 selects greedily
    bool gumbel_noise = false;  // maskgit baseline only
    uint64_t seed = 0;

    void validate() const;
};

/// Optional per-step record: masked count in the completion region after
/// each model call and commit.
struct SampleTrace {
    std::vector<int> mask_counts;
};

/// Block-wise left-to-right decoding with low-confidence re-masking inside
/// each block; commits exactly tokens_per_step tokens per inner step.
TokenSeq sample_semi_ar(const Policy& policy, const TokenSeq& prompt, const Vocab& vocab, const SamplerConfig& cfg,
                        SampleTrace* trace = nullptr);

/// Probabilistic reverse-process decoding: at each step every masked
/// position independently either stays masked or commits a token, with
/// probabilities given by the reverse transition rule.
TokenSeq sample_emerge(const Policy& policy, const TokenSeq& prompt, const Vocab& vocab, const SamplerConfig& cfg,
                       SampleTrace* trace = nullptr);

/// Low-confidence baseline with a cosine commit schedule.
TokenSeq sample_maskgit(const Policy& policy, const TokenSeq& prompt, const Vocab& vocab, const SamplerConfig& cfg,
                        SampleTrace* trace = nullptr);

/// Reference any-order sampler: one uniformly chosen masked position is
/// unmasked per step, its token drawn from the model distribution.
TokenSeq sample_exact_one_step(const Policy& policy, const TokenSeq& prompt, const Vocab& vocab,
                               const SamplerConfig& cfg, SampleTrace* trace = nullptr);

TokenSeq sample(const Policy& policy, const TokenSeq& prompt, const Vocab& vocab, const SamplerConfig& cfg,
                SampleTrace* trace = nullptr);

/// Softmax over one logits row at the given temperature with the mask id
/// excluded from the support. Computed in double; temperature <= 0 is
/// treated as greedy scoring at temperature 1.
std::vector<double> row_token_probs(const std::vector<double>& logits, int row, int vocab_size, int32_t mask_id,
                                    double temperature);

}  // namespace mgrpo
