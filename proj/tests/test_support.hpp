#pragma once

#include "mgrpo/grpo.hpp"
#include "mgrpo/model.hpp"
#include "mgrpo/rng.hpp"
#include "mgrpo/tasks.hpp"

namespace mgrpo::testing {

inline TokenSeq random_clean_seq(const Vocab& vocab, int prompt_len, int completion_len, uint64_t seed) {
    Rng rng(seed);
    TokenSeq o;
    o.prompt_len = prompt_len;
    for (int i = 0; i < prompt_len + completion_len; ++i) {
        int32_t id = vocab.mask_id;
        while (id == vocab.mask_id) {
            id = static_cast<int32_t>(rng.below(static_cast<uint64_t>(vocab.size)));
        }
        o.ids.push_back(id);
    }
    return o;
}

/// Policy that puts (almost) all probability mass on a fixed target
/// sequence, whatever the input looks like.
inline Policy one_hot_policy(const std::vector<int32_t>& target, int vocab_size) {
    Policy p;
    p.vocab_size = vocab_size;
    p.logits = [target, vocab_size](const std::vector<int32_t>& ids) {
        std::vector<double> out(ids.size() * static_cast<size_t>(vocab_size), 0.0);
        for (size_t i = 0; i < ids.size(); ++i) {
            out[i * static_cast<size_t>(vocab_size) + static_cast<size_t>(target[i])] = 60.0;
        }
        return out;
    };
    return p;
}

struct WarmSetup {
    TaskSpec task;
    Denoiser<float> model;
};

/// A small denoiser briefly pretrained on sort_digits; enough structure
/// for diversity and variance-trend checks, built once per process.
inline const WarmSetup& warm_model() {
    static const WarmSetup setup = [] {
        WarmSetup s;
        s.task.kind = TaskKind::sort_digits;
        s.task.prompt_min = 3;
        s.task.prompt_max = 3;
        s.task.completion_len = 8;
        ModelConfig cfg;
        cfg.vocab_size = Vocab().size;
        cfg.d_model = 32;
        cfg.n_heads = 4;
        cfg.n_blocks = 1;
        cfg.max_len = 16;
        s.model = Denoiser<float>::random_init(cfg, 4242);
        const Vocab vocab;
        pretrain(s.model, s.task, vocab, 400, 8, 3e-3, 4242);
        return s;
    }();
    return setup;
}

}  // namespace mgrpo::testing
