#include "mgrpo/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mgrpo/rng.hpp"

namespace mgrpo {

std::string sampler_name(SamplerKind kind) {
    switch (kind) {
        case SamplerKind::semi_ar:
            return "semi_ar";
        case SamplerKind::emerge:
            return "emerge";
        case SamplerKind::maskgit:
            return "maskgit";
        case SamplerKind::exact_one_step:
            return "exact_one_step";
    }
    return "?";
}

SamplerKind sampler_from_name(const std::string& name) {
    if (name == "semi_ar") {
        return SamplerKind::semi_ar;
    }
    if (name == "emerge") {
        return SamplerKind::emerge;
    }
    if (name == "maskgit") {
        return SamplerKind::maskgit;
    }
    if (name == "exact_one_step") {
        return SamplerKind::exact_one_step;
    }
    throw std::invalid_argument("unknown sampler: " + name);
}

void SamplerConfig::validate() const {
    if (completion_len < 1) {
        throw std::invalid_argument("sampler: completion_len must be >= 1");
    }
    if (kind == SamplerKind::semi_ar) {
        if (block_len < 1 || completion_len % block_len != 0) {
            throw std::invalid_argument("sampler: block_len must divide completion_len");
        }
        if (tokens_per_step < 1 || block_len % tokens_per_step != 0) {
            throw std::invalid_argument("sampler: tokens_per_step must divide block_len");
        }
    }
    if ((kind == SamplerKind::emerge || kind == SamplerKind::maskgit) && steps < 1) {
        throw std::invalid_argument("sampler: steps must be >= 1");
    }
    if (temperature < 0.0) {
        throw std::invalid_argument("sampler: temperature must be >= 0");
    }
}

std::vector<double> row_token_probs(const std::vector<double>& logits, int row, int vocab_size, int32_t mask_id,
                                    double temperature) {
    const double t_eff = temperature > 0.0 ? temperature : 1.0;
    const size_t base = static_cast<size_t>(row) * static_cast<size_t>(vocab_size);
    double mx = -std::numeric_limits<double>::infinity();
    for (int v = 0; v < vocab_size; ++v) {
        if (v == mask_id) {
            continue;
        }
        mx = std::max(mx, logits[base + static_cast<size_t>(v)] / t_eff);
    }
    std::vector<double> probs(static_cast<size_t>(vocab_size), 0.0);
    double sum = 0.0;
    for (int v = 0; v < vocab_size; ++v) {
        if (v == mask_id) {
            continue;
        }
        const double e = std::exp(logits[base + static_cast<size_t>(v)] / t_eff - mx);
        probs[static_cast<size_t>(v)] = e;
        sum += e;
    }
    for (auto& p : probs) {
        p /= sum;
    }
    return probs;
}

namespace {

struct Workspace {
    std::vector<int32_t> ids;
    int prompt_len = 0;
    int completion_len = 0;

    int begin() const { return prompt_len; }
    int end() const { return prompt_len + completion_len; }
};

Workspace init_workspace(const TokenSeq& prompt, const Vocab& vocab, const SamplerConfig& cfg) {
    cfg.validate();
    if (prompt.prompt_len != prompt.length()) {
        throw std::invalid_argument("sampler: prompt sequence must be all prompt");
    }
    Workspace w;
    w.prompt_len = prompt.length();
    w.completion_len = cfg.completion_len;
    w.ids = prompt.ids;
    w.ids.resize(static_cast<size_t>(w.prompt_len + cfg.completion_len), vocab.mask_id);
    return w;
}

TokenSeq finish(const Workspace& w, const Vocab& vocab) {
    for (int i = w.begin(); i < w.end(); ++i) {
        if (w.ids[static_cast<size_t>(i)] == vocab.mask_id) {
            throw std::logic_error("sampler: mask survived decoding");
        }
    }
    TokenSeq out;
    out.ids = w.ids;
    out.prompt_len = w.prompt_len;
    return out;
}

int count_masks(const Workspace& w, const Vocab& vocab) {
    int n = 0;
    for (int i = w.begin(); i < w.end(); ++i) {
        n += w.ids[static_cast<size_t>(i)] == vocab.mask_id;
    }
    return n;
}

void record(SampleTrace* trace, const Workspace& w, const Vocab& vocab) {
    if (trace != nullptr) {
        trace->mask_counts.push_back(count_masks(w, vocab));
    }
}

// Candidate commit: position, drawn token, its probability under the
// temperature softmax.
struct Candidate {
    int pos;
    int32_t token;
    double confidence;
    double score;  // ranking key; equals confidence unless noise is added
};

int32_t select_token(const std::vector<double>& probs, double temperature, Rng& rng) {
    if (temperature > 0.0) {
        return static_cast<int32_t>(rng.categorical(probs));
    }
    int32_t best = 0;
    for (size_t v = 1; v < probs.size(); ++v) {
        if (probs[v] > probs[static_cast<size_t>(best)]) {
            best = static_cast<int32_t>(v);
        }
    }
    return best;
}

void commit_top(std::vector<Candidate>& cands, int count, Workspace& w) {
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.pos < b.pos;
    });
    const int n = std::min<int>(count, static_cast<int>(cands.size()));
    for (int i = 0; i < n; ++i) {
        w.ids[static_cast<size_t>(cands[static_cast<size_t>(i)].pos)] = cands[static_cast<size_t>(i)].token;
    }
}

}  // namespace

TokenSeq sample_semi_ar(const Policy& policy, const TokenSeq& prompt, const Vocab& vocab, const SamplerConfig& cfg,
                        SampleTrace* trace) {
    if (cfg.kind != SamplerKind::semi_ar) {
        throw std::invalid_argument("sample_semi_ar: wrong sampler kind");
    }
    Workspace w = init_workspace(prompt, vocab, cfg);
    Rng rng(mix64(cfg.seed, 0x5e31ull));
    const int n_blocks = cfg.completion_len / cfg.block_len;
    const int inner_steps = cfg.block_len / cfg.tokens_per_step;
    for (int b = 0; b < n_blocks; ++b) {
        const int blk0 = w.begin() + b * cfg.block_len;
        const int blk1 = blk0 + cfg.block_len;
        for (int k = 0; k < inner_steps; ++k) {
            const std::vector<double> logits = policy.logits(w.ids);
            std::vector<Candidate> cands;
            for (int pos = blk0; pos < blk1; ++pos) {
                if (w.ids[static_cast<size_t>(pos)] != vocab.mask_id) {
                    continue;
                }
                const auto probs = row_token_probs(logits, pos, policy.vocab_size, vocab.mask_id, cfg.temperature);
                const int32_t tok = select_token(probs, cfg.temperature, rng);
                cands.push_back(Candidate{pos, tok, probs[static_cast<size_t>(tok)],
                                          probs[static_cast<size_t>(tok)]});
            }
            // Committed tokens are permanent; the s highest-confidence new
            // predictions survive, the rest stay masked for the next pass.
            commit_top(cands, cfg.tokens_per_step, w);
            record(trace, w, vocab);
        }
    }
    return finish(w, vocab);
}

TokenSeq sample_emerge(const Policy& policy, const TokenSeq& prompt, const Vocab& vocab, const SamplerConfig& cfg,
                       SampleTrace* trace) {
    if (cfg.kind != SamplerKind::emerge) {
        throw std::invalid_argument("sample_emerge: wrong sampler kind");
    }
    Workspace w = init_workspace(prompt, vocab, cfg);
    Rng rng(mix64(cfg.seed, 0xe3e6ull));
    const int K = cfg.steps;
    for (int k = 1; k <= K; ++k) {
        const double t = static_cast<double>(K - k + 1) / static_cast<double>(K);
        const double s = static_cast<double>(K - k) / static_cast<double>(K);
        const double alpha_t = cfg.schedule.alpha(t);
        const double alpha_s = cfg.schedule.alpha(s);
        const double stay = (1.0 - alpha_s) / (1.0 - alpha_t);
        const double emit = (alpha_s - alpha_t) / (1.0 - alpha_t);
        const std::vector<double> logits = policy.logits(w.ids);
        for (int pos = w.begin(); pos < w.end(); ++pos) {
            if (w.ids[static_cast<size_t>(pos)] != vocab.mask_id) {
                continue;
            }
            auto q = row_token_probs(logits, pos, policy.vocab_size, vocab.mask_id, cfg.temperature);
            double token_mass = 0.0;
            for (auto& p : q) {
                p *= emit;
                token_mass += p;
            }
            q[static_cast<size_t>(vocab.mask_id)] = stay;
            if (std::abs(stay + token_mass - 1.0) > 1e-9) {
                throw std::logic_error("sample_emerge: reverse transition row not normalized");
            }
            const auto drawn = static_cast<int32_t>(rng.categorical(q));
            if (drawn != vocab.mask_id) {
                w.ids[static_cast<size_t>(pos)] = drawn;
            }
        }
        record(trace, w, vocab);
    }
    return finish(w, vocab);
}

TokenSeq sample_maskgit(const Policy& policy, const TokenSeq& prompt, const Vocab& vocab, const SamplerConfig& cfg,
                        SampleTrace* trace) {
    if (cfg.kind != SamplerKind::maskgit) {
        throw std::invalid_argument("sample_maskgit: wrong sampler kind");
    }
    Workspace w = init_workspace(prompt, vocab, cfg);
    Rng rng(mix64(cfg.seed, 0x6a51ull));
    const int K = cfg.steps;
    const int L = cfg.completion_len;
    int masked = L;
    for (int k = 1; k <= K; ++k) {
        // Cosine schedule for the masked count, with at least one commit
        // per step while masks remain; the final step clears everything.
        const double frac = std::cos(1.5707963267948966192 * static_cast<double>(k) / static_cast<double>(K));
        const int target = k == K ? 0 : std::min(masked - 1, static_cast<int>(std::floor(frac * L)));
        const int commits = std::max(0, masked - std::max(0, target));
        const std::vector<double> logits = policy.logits(w.ids);
        std::vector<Candidate> cands;
        for (int pos = w.begin(); pos < w.end(); ++pos) {
            if (w.ids[static_cast<size_t>(pos)] != vocab.mask_id) {
                continue;
            }
            const auto probs = row_token_probs(logits, pos, policy.vocab_size, vocab.mask_id, cfg.temperature);
            int32_t best = 0;
            for (int v = 1; v < policy.vocab_size; ++v) {
                if (probs[static_cast<size_t>(v)] > probs[static_cast<size_t>(best)]) {
                    best = v;
                }
            }
            double score = probs[static_cast<size_t>(best)];
            if (cfg.gumbel_noise) {
                double u = rng.uniform01();
                while (u <= 0.0) {
                    u = rng.uniform01();
                }
                score = std::log(score) - std::log(-std::log(u));
            }
            cands.push_back(Candidate{pos, best, probs[static_cast<size_t>(best)], score});
        }
        commit_top(cands, commits, w);
        masked -= std::min(commits, static_cast<int>(cands.size()));
        record(trace, w, vocab);
    }
    return finish(w, vocab);
}

TokenSeq sample_exact_one_step(const Policy& policy, const TokenSeq& prompt, const Vocab& vocab,
                               const SamplerConfig& cfg, SampleTrace* trace) {
    if (cfg.kind != SamplerKind::exact_one_step) {
        throw std::invalid_argument("sample_exact_one_step: wrong sampler kind");
    }
    Workspace w = init_workspace(prompt, vocab, cfg);
    Rng rng(mix64(cfg.seed, 0xe0e5ull));
    for (int step = 0; step < cfg.completion_len; ++step) {
        std::vector<int> masked;
        for (int pos = w.begin(); pos < w.end(); ++pos) {
            if (w.ids[static_cast<size_t>(pos)] == vocab.mask_id) {
                masked.push_back(pos);
            }
        }
        const int pos = masked[static_cast<size_t>(rng.below(masked.size()))];
        const std::vector<double> logits = policy.logits(w.ids);
        const auto probs = row_token_probs(logits, pos, policy.vocab_size, vocab.mask_id, cfg.temperature);
        w.ids[static_cast<size_t>(pos)] = select_token(probs, cfg.temperature, rng);
        record(trace, w, vocab);
    }
    return finish(w, vocab);
}

TokenSeq sample(const Policy& policy, const TokenSeq& prompt, const Vocab& vocab, const SamplerConfig& cfg,
                SampleTrace* trace) {
    switch (cfg.kind) {
        case SamplerKind::semi_ar:
            return sample_semi_ar(policy, prompt, vocab, cfg, trace);
        case SamplerKind::emerge:
            return sample_emerge(policy, prompt, vocab, cfg, trace);
        case SamplerKind::maskgit:
            return sample_maskgit(policy, prompt, vocab, cfg, trace);
        case SamplerKind::exact_one_step:
            return sample_exact_one_step(policy, prompt, vocab, cfg, trace);
    }
    throw std::logic_error("sample: unknown sampler kind");
}

}  // namespace mgrpo
