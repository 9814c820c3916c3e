#include "mgrpo/reverse.hpp"

#include <stdexcept>

#include "mgrpo/rng.hpp"

namespace mgrpo {

std::string reverse_name(ReverseMethod m) {
    return m == ReverseMethod::ar_like ? "ar_like" : "random";
}

ReverseMethod reverse_from_name(const std::string& name) {
    if (name == "ar_like") {
        return ReverseMethod::ar_like;
    }
    if (name == "random") {
        return ReverseMethod::random;
    }
    throw std::invalid_argument("unknown reverse method: " + name);
}

MaskedView reverse_random(const TokenSeq& o, const ReverseSpec& spec, const Vocab& vocab) {
    if (spec.method != ReverseMethod::random) {
        throw std::invalid_argument("reverse_random: wrong method in spec");
    }
    if (spec.ratio < 0.0 || spec.ratio > 1.0) {
        throw std::domain_error("reverse_random: ratio outside [0,1]");
    }
    Rng rng(spec.seed);
    MaskedView view;
    view.t = spec.ratio;
    view.ids = o.ids;
    view.mask.assign(o.ids.size(), 0);
    for (int i = o.prompt_len; i < o.length(); ++i) {
        if (rng.uniform01() < spec.ratio) {
            view.ids[static_cast<size_t>(i)] = vocab.mask_id;
            view.mask[static_cast<size_t>(i)] = 1;
        }
    }
    return view;
}

MaskedView reverse_ar_like(const TokenSeq& o, const ReverseSpec& spec, const Vocab& vocab) {
    if (spec.method != ReverseMethod::ar_like) {
        throw std::invalid_argument("reverse_ar_like: wrong method in spec");
    }
    if (spec.ratio < 0.0 || spec.ratio > 1.0) {
        throw std::domain_error("reverse_ar_like: ratio outside [0,1]");
    }
    if (spec.ratio < 0.5) {
        // keep-probability 2(1-r) at the first completion token would
        // exceed 1 and break the exact expected-count identity.
        throw std::domain_error("reverse_ar_like: ratio below 0.5 is not representable");
    }
    const int len_o = o.completion_len();
    Rng rng(spec.seed);
    MaskedView view;
    view.t = spec.ratio;
    view.ids = o.ids;
    view.mask.assign(o.ids.size(), 0);
    if (len_o <= 0) {
        return view;
    }
    // d = linspace(1, 0, L_o); keep-probability p = d * (1-r) * L_o / sum(d).
    // For L_o > 1, sum(d) = L_o / 2; a single completion token keeps p = 1-r.
    std::vector<double> keep(static_cast<size_t>(len_o));
    if (len_o == 1) {
        keep[0] = 1.0 - spec.ratio;
    } else {
        double sum_d = 0.0;
        for (int i = 0; i < len_o; ++i) {
            const double d = 1.0 - static_cast<double>(i) / static_cast<double>(len_o - 1);
            keep[static_cast<size_t>(i)] = d;
            sum_d += d;
        }
        const double scale = (1.0 - spec.ratio) * static_cast<double>(len_o) / sum_d;
        for (auto& k : keep) {
            k *= scale;
        }
    }
    for (int i = 0; i < len_o; ++i) {
        const int pos = o.prompt_len + i;
        if (rng.uniform01() > keep[static_cast<size_t>(i)]) {
            view.ids[static_cast<size_t>(pos)] = vocab.mask_id;
            view.mask[static_cast<size_t>(pos)] = 1;
        }
    }
    return view;
}

MaskedView reverse(const TokenSeq& o, const ReverseSpec& spec, const Vocab& vocab) {
    return spec.method == ReverseMethod::ar_like ? reverse_ar_like(o, spec, vocab)
                                                 : reverse_random(o, spec, vocab);
}

TimestepGrid timestep_grid(double gamma, int mu) {
    if (!(gamma >= 0.0 && gamma < 1.0)) {
        throw std::domain_error("timestep_grid: gamma outside [0,1)");
    }
    if (mu < 1) {
        throw std::domain_error("timestep_grid: mu must be >= 1");
    }
    TimestepGrid grid;
    grid.gamma = gamma;
    grid.mu = mu;
    grid.values.resize(static_cast<size_t>(mu));
    for (int j = 1; j <= mu; ++j) {
        grid.values[static_cast<size_t>(j - 1)] =
            j == mu ? 1.0 : gamma + (1.0 - gamma) * static_cast<double>(j) / static_cast<double>(mu);
    }
    return grid;
}

std::vector<uint64_t> seed_set(uint64_t master_seed, int mu) {
    if (mu < 1) {
        throw std::domain_error("seed_set: mu must be >= 1");
    }
    std::vector<uint64_t> seeds(static_cast<size_t>(mu));
    for (int j = 0; j < mu; ++j) {
        seeds[static_cast<size_t>(j)] = mix64(master_seed, 0x5eedull, static_cast<uint64_t>(j + 1));
    }
    return seeds;
}

}  // namespace mgrpo
