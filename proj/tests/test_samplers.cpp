#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mgrpo/rng.hpp"
#include "mgrpo/sampler.hpp"
#include "mgrpo/schedule.hpp"
#include "test_support.hpp"

using namespace mgrpo;
using mgrpo::testing::one_hot_policy;
using mgrpo::testing::random_clean_seq;

namespace {

TokenSeq make_prompt(const Vocab& vocab, int len, uint64_t seed) {
    TokenSeq p = random_clean_seq(vocab, len, 0, seed);
    return p;
}

}  // namespace

TEST_CASE("semi_ar with one block and s = L is a one-shot greedy decode") {
    const Vocab vocab;
    const auto& warm = mgrpo::testing::warm_model();
    const Policy policy = warm.model.policy();
    TokenSeq prompt = make_prompt(vocab, 4, 2);

    SamplerConfig cfg;
    cfg.kind = SamplerKind::semi_ar;
    cfg.completion_len = 8;
    cfg.block_len = 8;
    cfg.tokens_per_step = 8;
    cfg.temperature = 0.0;
    cfg.seed = 5;
    SampleTrace trace;
    const TokenSeq out = sample_semi_ar(policy, prompt, vocab, cfg, &trace);
    REQUIRE(trace.mask_counts == std::vector<int>{0});

    // Manual greedy fill of the all-masked input.
    std::vector<int32_t> ids = prompt.ids;
    ids.resize(12, vocab.mask_id);
    const auto logits = policy.logits(ids);
    for (int pos = 4; pos < 12; ++pos) {
        const auto probs = row_token_probs(logits, pos, policy.vocab_size, vocab.mask_id, 0.0);
        int32_t best = 0;
        for (int v = 1; v < policy.vocab_size; ++v) {
            if (probs[static_cast<size_t>(v)] > probs[static_cast<size_t>(best)]) {
                best = v;
            }
        }
        CHECK(out.ids[static_cast<size_t>(pos)] == best);
    }
}

TEST_CASE("semi_ar inner-step mask counts follow the commit arithmetic") {
    const Vocab vocab;
    ModelConfig mc;
    mc.vocab_size = vocab.size;
    mc.d_model = 16;
    mc.n_heads = 2;
    mc.n_blocks = 1;
    mc.max_len = 24;
    const auto model = Denoiser<float>::random_init(mc, 3, 0.1);
    const Policy policy = model.policy();
    TokenSeq prompt = make_prompt(vocab, 4, 4);

    SamplerConfig cfg;
    cfg.kind = SamplerKind::semi_ar;
    cfg.completion_len = 16;
    cfg.block_len = 16;
    cfg.tokens_per_step = 2;
    cfg.seed = 11;
    SampleTrace trace;
    sample_semi_ar(policy, prompt, vocab, cfg, &trace);
    REQUIRE(trace.mask_counts.size() == 8);
    for (int k = 1; k <= 8; ++k) {
        CHECK(trace.mask_counts[static_cast<size_t>(k - 1)] == 16 - 2 * k);
    }
}

TEST_CASE("semi_ar validates divisibility") {
    const Vocab vocab;
    const Policy policy = one_hot_policy(std::vector<int32_t>(12, 1), vocab.size);
    TokenSeq prompt = make_prompt(vocab, 4, 5);
    SamplerConfig cfg;
    cfg.kind = SamplerKind::semi_ar;
    cfg.completion_len = 8;
    cfg.block_len = 3;
    CHECK_THROWS(sample_semi_ar(policy, prompt, vocab, cfg));
    cfg.block_len = 8;
    cfg.tokens_per_step = 3;
    CHECK_THROWS(sample_semi_ar(policy, prompt, vocab, cfg));
}

TEST_CASE("a one-hot model reproduces its target under every sampler") {
    const Vocab vocab;
    TokenSeq prompt = make_prompt(vocab, 3, 6);
    std::vector<int32_t> target = prompt.ids;
    Rng rng(99);
    for (int i = 0; i < 8; ++i) {
        int32_t id = vocab.mask_id;
        while (id == vocab.mask_id || id == vocab.pad_id) {
            id = static_cast<int32_t>(rng.below(static_cast<uint64_t>(vocab.size)));
        }
        target.push_back(id);
    }
    const Policy policy = one_hot_policy(target, vocab.size);
    const std::vector<int32_t> expected(target.begin() + 3, target.end());

    SamplerConfig cfg;
    cfg.completion_len = 8;
    cfg.seed = 21;

    cfg.kind = SamplerKind::semi_ar;
    for (const auto [block, s] : {std::pair{8, 8}, {8, 2}, {4, 1}, {2, 2}}) {
        cfg.block_len = block;
        cfg.tokens_per_step = s;
        const TokenSeq out = sample_semi_ar(policy, prompt, vocab, cfg);
        CHECK(std::equal(out.ids.begin() + 3, out.ids.end(), expected.begin(), expected.end()));
    }

    cfg.kind = SamplerKind::emerge;
    cfg.steps = 4;
    cfg.schedule.kind = ScheduleKind::linear;
    const TokenSeq em = sample_emerge(policy, prompt, vocab, cfg);
    CHECK(std::equal(em.ids.begin() + 3, em.ids.end(), expected.begin(), expected.end()));

    cfg.kind = SamplerKind::maskgit;
    cfg.steps = 3;
    const TokenSeq mg = sample_maskgit(policy, prompt, vocab, cfg);
    CHECK(std::equal(mg.ids.begin() + 3, mg.ids.end(), expected.begin(), expected.end()));

    cfg.kind = SamplerKind::exact_one_step;
    const TokenSeq os = sample_exact_one_step(policy, prompt, vocab, cfg);
    CHECK(std::equal(os.ids.begin() + 3, os.ids.end(), expected.begin(), expected.end()));
}

TEST_CASE("emerge commits every position in a single step when K=1") {
    const Vocab vocab;
    ModelConfig mc;
    mc.vocab_size = vocab.size;
    mc.d_model = 16;
    mc.n_heads = 2;
    mc.n_blocks = 1;
    mc.max_len = 16;
    const auto model = Denoiser<float>::random_init(mc, 8, 0.1);
    const Policy policy = model.policy();
    TokenSeq prompt = make_prompt(vocab, 2, 7);
    SamplerConfig cfg;
    cfg.kind = SamplerKind::emerge;
    cfg.completion_len = 6;
    cfg.steps = 1;
    cfg.schedule.kind = ScheduleKind::linear;
    cfg.seed = 31;
    SampleTrace trace;
    sample_emerge(policy, prompt, vocab, cfg, &trace);
    REQUIRE(trace.mask_counts == std::vector<int>{0});
}

TEST_CASE("emerge stay-masked probability matches the reverse rule") {
    // Linear schedule, K=4, first step: (1 - alpha(0.75)) / (1 - alpha(1)).
    NoiseSchedule linear{ScheduleKind::linear};
    const double stay = (1.0 - linear.alpha(0.75)) / (1.0 - linear.alpha(1.0));
    CHECK(stay == doctest::Approx(0.75).epsilon(1e-15));

    // Empirically: fraction of positions still masked after step one.
    const Vocab vocab;
    ModelConfig mc;
    mc.vocab_size = vocab.size;
    mc.d_model = 16;
    mc.n_heads = 2;
    mc.n_blocks = 1;
    mc.max_len = 40;
    const auto model = Denoiser<float>::random_init(mc, 9, 0.1);
    const Policy policy = model.policy();
    TokenSeq prompt = make_prompt(vocab, 2, 8);
    SamplerConfig cfg;
    cfg.kind = SamplerKind::emerge;
    cfg.completion_len = 32;
    cfg.steps = 4;
    cfg.schedule.kind = ScheduleKind::linear;
    double stayed = 0.0;
    const int n_seeds = 3000;
    for (int s = 0; s < n_seeds; ++s) {
        cfg.seed = static_cast<uint64_t>(s);
        SampleTrace trace;
        sample_emerge(policy, prompt, vocab, cfg, &trace);
        stayed += trace.mask_counts[0];
    }
    const double frac = stayed / (n_seeds * 32.0);
    CHECK(std::abs(frac - 0.75) < 0.01);
}

TEST_CASE("emerge unmasked set grows monotonically and committed tokens never change") {
    const Vocab vocab;
    ModelConfig mc;
    mc.vocab_size = vocab.size;
    mc.d_model = 16;
    mc.n_heads = 2;
    mc.n_blocks = 1;
    mc.max_len = 24;
    const auto model = Denoiser<float>::random_init(mc, 10, 0.1);
    Policy inner = model.policy();

    // Instrument the policy: every call sees the sampler's current state.
    std::vector<std::vector<int32_t>> calls;
    Policy spy;
    spy.vocab_size = inner.vocab_size;
    spy.logits = [&](const std::vector<int32_t>& ids) {
        calls.push_back(ids);
        return inner.logits(ids);
    };

    TokenSeq prompt = make_prompt(vocab, 2, 9);
    SamplerConfig cfg;
    cfg.kind = SamplerKind::emerge;
    cfg.completion_len = 12;
    cfg.steps = 6;
    cfg.schedule.kind = ScheduleKind::cosine;
    for (uint64_t s = 0; s < 50; ++s) {
        calls.clear();
        cfg.seed = s;
        const TokenSeq out = sample_emerge(spy, prompt, vocab, cfg);
        calls.push_back(out.ids);
        for (size_t c = 1; c < calls.size(); ++c) {
            for (size_t i = 2; i < calls[c].size(); ++i) {
                if (calls[c - 1][i] != vocab.mask_id) {
                    REQUIRE(calls[c][i] == calls[c - 1][i]);
                }
            }
        }
    }
}

TEST_CASE("maskgit: K=1 equals one-shot greedy; K=L commits one token per step") {
    const Vocab vocab;
    const auto& warm = mgrpo::testing::warm_model();
    const Policy policy = warm.model.policy();
    TokenSeq prompt = make_prompt(vocab, 4, 12);

    SamplerConfig one;
    one.kind = SamplerKind::maskgit;
    one.completion_len = 8;
    one.steps = 1;
    one.seed = 3;
    const TokenSeq mg = sample_maskgit(policy, prompt, vocab, one);

    SamplerConfig greedy;
    greedy.kind = SamplerKind::semi_ar;
    greedy.completion_len = 8;
    greedy.block_len = 8;
    greedy.tokens_per_step = 8;
    greedy.temperature = 0.0;
    greedy.seed = 4;
    const TokenSeq oneshot = sample_semi_ar(policy, prompt, vocab, greedy);
    CHECK(mg.ids == oneshot.ids);

    SamplerConfig perstep;
    perstep.kind = SamplerKind::maskgit;
    perstep.completion_len = 8;
    perstep.steps = 8;
    perstep.seed = 5;
    SampleTrace trace;
    sample_maskgit(policy, prompt, vocab, perstep, &trace);
    REQUIRE(trace.mask_counts.size() == 8);
    for (int k = 0; k < 8; ++k) {
        CHECK(trace.mask_counts[static_cast<size_t>(k)] == 7 - k);
    }
}

TEST_CASE("exact_one_step single-token completion draws from the model distribution") {
    const Vocab vocab = Vocab::tiny(4, 3, 2);
    // Fixed non-uniform single-row distribution.
    Policy policy;
    policy.vocab_size = 4;
    policy.logits = [](const std::vector<int32_t>& ids) {
        std::vector<double> out(ids.size() * 4, 0.0);
        for (size_t i = 0; i < ids.size(); ++i) {
            out[i * 4 + 0] = std::log(0.5);
            out[i * 4 + 1] = std::log(0.3);
            out[i * 4 + 2] = std::log(0.2);
            out[i * 4 + 3] = -40.0;  // mask slot, excluded anyway
        }
        return out;
    };
    TokenSeq prompt;
    prompt.prompt_len = 1;
    prompt.ids = {0};
    SamplerConfig cfg;
    cfg.kind = SamplerKind::exact_one_step;
    cfg.completion_len = 1;
    const int n = 100000;
    std::vector<int> counts(4, 0);
    for (int s = 0; s < n; ++s) {
        cfg.seed = static_cast<uint64_t>(s);
        const TokenSeq out = sample_exact_one_step(policy, prompt, vocab, cfg);
        counts[static_cast<size_t>(out.ids[1])] += 1;
    }
    const double expected[3] = {0.5, 0.3, 0.2};
    for (int v = 0; v < 3; ++v) {
        const double p = expected[v];
        const double sigma = std::sqrt(p * (1 - p) / n);
        CHECK(std::abs(counts[static_cast<size_t>(v)] / static_cast<double>(n) - p) < 3 * sigma);
    }
}

TEST_CASE("all samplers: no mask in output, prompt intact, seed-deterministic") {
    const Vocab vocab;
    const auto& warm = mgrpo::testing::warm_model();
    const Policy policy = warm.model.policy();
    TokenSeq prompt = make_prompt(vocab, 4, 14);

    auto run = [&](SamplerKind kind, uint64_t seed) {
        SamplerConfig cfg;
        cfg.kind = kind;
        cfg.completion_len = 8;
        cfg.block_len = 4;
        cfg.tokens_per_step = 2;
        cfg.steps = 5;
        cfg.schedule.kind = ScheduleKind::linear;
        cfg.temperature = 1.0;
        cfg.seed = seed;
        return sample(policy, prompt, vocab, cfg);
    };
    for (const auto kind :
         {SamplerKind::semi_ar, SamplerKind::emerge, SamplerKind::maskgit, SamplerKind::exact_one_step}) {
        const TokenSeq a = run(kind, 77);
        const TokenSeq b = run(kind, 77);
        CHECK(a.ids == b.ids);
        for (int i = 0; i < prompt.length(); ++i) {
            REQUIRE(a.ids[static_cast<size_t>(i)] == prompt.ids[static_cast<size_t>(i)]);
        }
        for (size_t i = static_cast<size_t>(prompt.length()); i < a.ids.size(); ++i) {
            REQUIRE(a.ids[i] != vocab.mask_id);
        }
    }
}

TEST_CASE("emerge rollouts are at least as diverse as greedy maskgit") {
    const Vocab vocab;
    const auto& warm = mgrpo::testing::warm_model();
    const Policy policy = warm.model.policy();

    int emerge_distinct = 0;
    int maskgit_distinct = 0;
    for (int p = 0; p < 50; ++p) {
        Example ex = gen_example(warm.task, vocab, mix64(0x600dull, static_cast<uint64_t>(p)));
        std::set<std::vector<int32_t>> emerge_set;
        std::set<std::vector<int32_t>> maskgit_set;
        for (int g = 0; g < 9; ++g) {
            SamplerConfig cfg;
            cfg.kind = SamplerKind::emerge;
            cfg.completion_len = warm.task.completion_len;
            cfg.steps = 12;
            cfg.schedule.kind = ScheduleKind::cosine;
            cfg.temperature = 1.0;
            cfg.seed = mix64(static_cast<uint64_t>(p), static_cast<uint64_t>(g));
            emerge_set.insert(sample_emerge(policy, ex.prompt, vocab, cfg).ids);

            cfg.kind = SamplerKind::maskgit;
            maskgit_set.insert(sample_maskgit(policy, ex.prompt, vocab, cfg).ids);
        }
        emerge_distinct += static_cast<int>(emerge_set.size());
        maskgit_distinct += static_cast<int>(maskgit_set.size());
    }
    CHECK(emerge_distinct >= maskgit_distinct);
}
