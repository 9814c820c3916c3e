#include <doctest.h>

#include <cmath>

#include "mgrpo/reverse.hpp"
#include "mgrpo/rng.hpp"

using namespace mgrpo;

namespace {

TokenSeq make_seq(const Vocab& vocab, int prompt_len, int completion_len, uint64_t seed) {
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

}  // namespace

TEST_CASE("random reversing extremes") {
    const Vocab vocab;
    TokenSeq o = make_seq(vocab, 3, 16, 1);
    const MaskedView all = reverse_random(o, {ReverseMethod::random, 1.0, 7}, vocab);
    CHECK(all.masked_count() == 16);
    const MaskedView none = reverse_random(o, {ReverseMethod::random, 0.0, 7}, vocab);
    CHECK(none.masked_count() == 0);
    CHECK_THROWS(reverse_random(o, {ReverseMethod::random, 1.2, 7}, vocab));
    CHECK_THROWS(reverse_random(o, {ReverseMethod::ar_like, 0.5, 7}, vocab));
}

TEST_CASE("ar_like rejects ratios below one half and masks everything at r=1") {
    const Vocab vocab;
    TokenSeq o = make_seq(vocab, 3, 16, 2);
    CHECK_THROWS(reverse_ar_like(o, {ReverseMethod::ar_like, 0.49, 3}, vocab));
    const MaskedView all = reverse_ar_like(o, {ReverseMethod::ar_like, 1.0, 3}, vocab);
    CHECK(all.masked_count() == 16);
}

TEST_CASE("ar_like always masks the last completion position") {
    const Vocab vocab;
    TokenSeq o = make_seq(vocab, 2, 10, 3);
    for (uint64_t s = 0; s < 2000; ++s) {
        const MaskedView v = reverse_ar_like(o, {ReverseMethod::ar_like, 0.6, s}, vocab);
        CHECK(v.mask.back() == 1);
    }
}

TEST_CASE("single completion token keeps with probability 1-r") {
    const Vocab vocab;
    TokenSeq o = make_seq(vocab, 4, 1, 4);
    int masked = 0;
    const int n = 20000;
    for (int s = 0; s < n; ++s) {
        masked += reverse_ar_like(o, {ReverseMethod::ar_like, 0.7, mix64(5, static_cast<uint64_t>(s))}, vocab)
                      .masked_count();
    }
    const double frac = static_cast<double>(masked) / n;
    CHECK(std::abs(frac - 0.7) < 0.02);
}

TEST_CASE("expected masked counts match r * L_o within 2% for both methods") {
    const Vocab vocab;
    const int n_seeds = 10000;
    struct Case {
        ReverseMethod method;
        double r;
        int len;
        double expected;
    };
    const Case cases[] = {
        {ReverseMethod::random, 0.8, 1024, 819.2},
        {ReverseMethod::ar_like, 0.6, 256, 153.6},
    };
    for (const auto& c : cases) {
        TokenSeq o = make_seq(vocab, 2, c.len, 6);
        double total = 0.0;
        for (int s = 0; s < n_seeds; ++s) {
            total += reverse(o, {c.method, c.r, mix64(0xabull, static_cast<uint64_t>(s))}, vocab).masked_count();
        }
        const double mean = total / n_seeds;
        CHECK(std::abs(mean - c.expected) < 0.02 * c.expected);
    }
}

TEST_CASE("prompt positions are never masked by either method") {
    const Vocab vocab;
    TokenSeq o = make_seq(vocab, 5, 20, 7);
    for (const auto method : {ReverseMethod::random, ReverseMethod::ar_like}) {
        for (uint64_t s = 0; s < 3000; ++s) {
            const MaskedView v = reverse(o, {method, 0.9, s}, vocab);
            for (int i = 0; i < o.prompt_len; ++i) {
                REQUIRE(v.mask[static_cast<size_t>(i)] == 0);
                REQUIRE(v.ids[static_cast<size_t>(i)] == o.ids[static_cast<size_t>(i)]);
            }
            v.validate(vocab, o.prompt_len);
        }
    }
}

TEST_CASE("per-position frequency: ar_like fades out, random stays flat") {
    const Vocab vocab;
    const int len_o = 64;
    const int n_seeds = 10000;
    const double r = 0.6;
    TokenSeq o = make_seq(vocab, 2, len_o, 8);
    for (const auto method : {ReverseMethod::ar_like, ReverseMethod::random}) {
        std::vector<double> freq(static_cast<size_t>(len_o), 0.0);
        for (int s = 0; s < n_seeds; ++s) {
            const MaskedView v = reverse(o, {method, r, mix64(0x11ull, static_cast<uint64_t>(s))}, vocab);
            for (int i = 0; i < len_o; ++i) {
                freq[static_cast<size_t>(i)] += v.mask[static_cast<size_t>(o.prompt_len + i)];
            }
        }
        for (auto& f : freq) {
            f /= n_seeds;
        }
        if (method == ReverseMethod::ar_like) {
            for (int i = 0; i + 1 < len_o; ++i) {
                const double p0 = freq[static_cast<size_t>(i)];
                const double p1 = freq[static_cast<size_t>(i + 1)];
                const double band = 3.0 * std::sqrt((p0 * (1 - p0) + p1 * (1 - p1)) / n_seeds);
                CHECK(p1 - p0 >= -band);
            }
            CHECK(freq.front() < 0.5);  // keep-probability 2(1-r) = 0.8 there
            CHECK(freq.back() == 1.0);
        } else {
            const double sigma = std::sqrt(r * (1 - r) / n_seeds);
            for (int i = 0; i < len_o; ++i) {
                CHECK(std::abs(freq[static_cast<size_t>(i)] - r) < 3.0 * sigma);
            }
        }
    }
}

TEST_CASE("timestep grid values") {
    const TimestepGrid g0 = timestep_grid(0.0, 4);
    REQUIRE(g0.values.size() == 4);
    CHECK(g0.values[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(g0.values[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g0.values[2] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(g0.values[3] == 1.0);

    const TimestepGrid text = timestep_grid(0.6, 6);
    REQUIRE(text.values.size() == 6);
    for (int j = 1; j <= 6; ++j) {
        const double expected = j == 6 ? 1.0 : 0.6 + 0.4 * j / 6.0;
        CHECK(text.values[static_cast<size_t>(j - 1)] == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(text.values.back() == 1.0);

    const TimestepGrid vision = timestep_grid(0.8, 8);
    REQUIRE(vision.values.size() == 8);
    for (double t : vision.values) {
        CHECK(t > 0.8);
        CHECK(t <= 1.0);
    }
    CHECK(vision.values.back() == 1.0);

    CHECK_THROWS(timestep_grid(1.0, 4));
    CHECK_THROWS(timestep_grid(-0.1, 4));
    CHECK_THROWS(timestep_grid(0.5, 0));
}

TEST_CASE("seed sets are deterministic, reproducible, and distinct") {
    const auto a = seed_set(42, 6);
    const auto b = seed_set(42, 6);
    CHECK(a == b);
    REQUIRE(a.size() == 6);
    for (size_t i = 0; i < a.size(); ++i) {
        for (size_t j = i + 1; j < a.size(); ++j) {
            CHECK(a[i] != a[j]);
        }
    }

    const Vocab vocab;
    TokenSeq o = make_seq(vocab, 2, 256, 12);
    // Same S_j twice: bit-identical view. Different j: different masks.
    int identical_pairs = 0;
    for (uint64_t master = 0; master < 1000; ++master) {
        const auto seeds = seed_set(master, 2);
        const MaskedView v1 = reverse(o, {ReverseMethod::random, 0.7, seeds[0]}, vocab);
        const MaskedView v1_again = reverse(o, {ReverseMethod::random, 0.7, seeds[0]}, vocab);
        REQUIRE(v1.ids == v1_again.ids);
        REQUIRE(v1.mask == v1_again.mask);
        const MaskedView v2 = reverse(o, {ReverseMethod::random, 0.7, seeds[1]}, vocab);
        identical_pairs += v1.mask == v2.mask;
    }
    CHECK(identical_pairs == 0);
}
