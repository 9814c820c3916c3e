#include "mgrpo/oracle.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace mgrpo {

namespace {

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) {
        f *= static_cast<double>(i);
    }
    return f;
}

void check_budget(int len, int vocab_size, const EnumerationBudget& budget) {
    if (len > budget.max_len) {
        throw std::domain_error("oracle: completion length exceeds enumeration budget");
    }
    if (vocab_size > budget.max_vocab) {
        throw std::domain_error("oracle: vocabulary exceeds enumeration budget");
    }
    if (factorial(len) * std::pow(static_cast<double>(vocab_size), len) > budget.max_paths) {
        throw std::domain_error("oracle: path count exceeds enumeration budget");
    }
}

// ids with completion positions in `filled` revealed, others masked.
std::vector<int32_t> view_ids(const TokenSeq& o, const Vocab& vocab, uint32_t filled) {
    std::vector<int32_t> ids = o.ids;
    for (int i = 0; i < o.completion_len(); ++i) {
        if ((filled & (1u << i)) == 0) {
            ids[static_cast<size_t>(o.prompt_len + i)] = vocab.mask_id;
        }
    }
    return ids;
}

// Mask-excluded renormalized probability of the clean token at relative
// completion position `rel`, given the filled subset. Matches the sampler.
double sampler_token_prob(const Policy& policy, const TokenSeq& o, const Vocab& vocab, uint32_t filled, int rel) {
    const auto logits = policy.logits(view_ids(o, vocab, filled));
    const auto probs = row_token_probs(logits, o.prompt_len + rel, policy.vocab_size, vocab.mask_id, 1.0);
    return probs[static_cast<size_t>(o.ids[static_cast<size_t>(o.prompt_len + rel)])];
}

// Full-vocabulary log-probability of the clean token, matching ddm_loss.
double loss_token_logprob(const std::vector<double>& logits, int row, int vocab_size, int32_t target) {
    const size_t base = static_cast<size_t>(row) * static_cast<size_t>(vocab_size);
    double mx = logits[base];
    for (int v = 1; v < vocab_size; ++v) {
        mx = std::max(mx, logits[base + static_cast<size_t>(v)]);
    }
    double sum = 0.0;
    for (int v = 0; v < vocab_size; ++v) {
        sum += std::exp(logits[base + static_cast<size_t>(v)] - mx);
    }
    return logits[base + static_cast<size_t>(target)] - mx - std::log(sum);
}

// G(M) = sum over masked completion positions of the full-vocab
// log-probability of the clean token given the view with mask set M.
// Index = bitmask of MASKED positions.
std::vector<double> masked_logprob_sums(const Policy& policy, const TokenSeq& o, const Vocab& vocab) {
    const int len = o.completion_len();
    const uint32_t n_patterns = 1u << len;
    std::vector<double> g(n_patterns, 0.0);
    for (uint32_t masked = 1; masked < n_patterns; ++masked) {
        const uint32_t filled = (n_patterns - 1u) & ~masked;
        const auto logits = policy.logits(view_ids(o, vocab, filled));
        double acc = 0.0;
        for (int i = 0; i < len; ++i) {
            if (masked & (1u << i)) {
                acc += loss_token_logprob(logits, o.prompt_len + i, policy.vocab_size,
                                          o.ids[static_cast<size_t>(o.prompt_len + i)]);
            }
        }
        g[masked] = acc;
    }
    return g;
}

}  // namespace

double exact_anyorder_loglik(const Policy& policy, const TokenSeq& o, const Vocab& vocab,
                             const EnumerationBudget& budget) {
    const int len = o.completion_len();
    if (len < 1) {
        throw std::invalid_argument("exact_anyorder_loglik: empty completion");
    }
    check_budget(len, policy.vocab_size, budget);
    // f(S) = sum over orders that fill S of the product of step
    // probabilities; f(full) / L! is the order-marginalized probability.
    const uint32_t full = (1u << len) - 1u;
    std::vector<double> f(full + 1u, 0.0);
    f[0] = 1.0;
    for (uint32_t s = 1; s <= full; ++s) {
        double acc = 0.0;
        for (int i = 0; i < len; ++i) {
            const uint32_t bit = 1u << i;
            if (s & bit) {
                const uint32_t prev = s & ~bit;
                if (f[prev] != 0.0) {
                    acc += f[prev] * sampler_token_prob(policy, o, vocab, prev, i);
                }
            }
        }
        f[s] = acc;
    }
    return std::log(f[full] / factorial(len));
}

double exact_elbo(const Policy& policy, const TokenSeq& o, const Vocab& vocab, int t_resolution,
                  const EnumerationBudget& budget) {
    const int len = o.completion_len();
    if (len < 1) {
        throw std::invalid_argument("exact_elbo: empty completion");
    }
    if (t_resolution < 1) {
        throw std::domain_error("exact_elbo: bad resolution");
    }
    check_budget(len, policy.vocab_size, budget);
    const auto g = masked_logprob_sums(policy, o, vocab);
    // B = int_0^1 (1/t) E_M[G(M)] dt; with P_t(M) = t^|M| (1-t)^(L-|M|)
    // the integrand reduces to sum_M t^(|M|-1) (1-t)^(L-|M|) G(M), which
    // only depends on |M|; midpoint rule over t per masked count.
    std::vector<double> weight(static_cast<size_t>(len) + 1, 0.0);
    for (int c = 1; c <= len; ++c) {
        double acc = 0.0;
        for (int m = 0; m < t_resolution; ++m) {
            const double t = (static_cast<double>(m) + 0.5) / static_cast<double>(t_resolution);
            acc += std::pow(t, c - 1) * std::pow(1.0 - t, len - c);
        }
        weight[static_cast<size_t>(c)] = acc / static_cast<double>(t_resolution);
    }
    double bound = 0.0;
    const uint32_t n_patterns = 1u << len;
    for (uint32_t masked = 1; masked < n_patterns; ++masked) {
        bound += weight[static_cast<size_t>(std::popcount(masked))] * g[masked];
    }
    return bound;
}

double exact_estimator_mean(const Policy& policy, const TokenSeq& o, const Vocab& vocab, int nu,
                            const EnumerationBudget& budget) {
    const int len = o.completion_len();
    if (len < 1 || nu < 1) {
        throw std::invalid_argument("exact_estimator_mean: bad arguments");
    }
    check_budget(len, policy.vocab_size, budget);
    const auto g = masked_logprob_sums(policy, o, vocab);
    const uint32_t n_patterns = 1u << len;

    // Per grid point: mean term conditioned on a non-empty draw, and the
    // probability that the point survives (one resample allowed).
    std::vector<double> m_j(static_cast<size_t>(nu), 0.0);
    std::vector<double> used_prob(static_cast<size_t>(nu), 0.0);
    for (int j = 1; j <= nu; ++j) {
        const double t = static_cast<double>(j) / static_cast<double>(nu);
        const double p_empty = std::pow(1.0 - t, len);
        double mean = 0.0;
        for (uint32_t masked = 1; masked < n_patterns; ++masked) {
            const int c = std::popcount(masked);
            const double p = std::pow(t, c) * std::pow(1.0 - t, len - c);
            mean += p * static_cast<double>(len) * g[masked] / static_cast<double>(c);
        }
        mean /= (1.0 - p_empty);
        m_j[static_cast<size_t>(j - 1)] = mean;
        used_prob[static_cast<size_t>(j - 1)] = 1.0 - p_empty * p_empty;
    }

    // E[ 1{j used} / #used ]: Poisson-binomial over the other grid points.
    double expectation = 0.0;
    for (int j = 0; j < nu; ++j) {
        std::vector<double> count_dist{1.0};  // distribution of #used among k != j
        for (int k = 0; k < nu; ++k) {
            if (k == j) {
                continue;
            }
            const double u = used_prob[static_cast<size_t>(k)];
            std::vector<double> next(count_dist.size() + 1, 0.0);
            for (size_t c = 0; c < count_dist.size(); ++c) {
                next[c] += count_dist[c] * (1.0 - u);
                next[c + 1] += count_dist[c] * u;
            }
            count_dist = std::move(next);
        }
        double inv_count = 0.0;
        for (size_t c = 0; c < count_dist.size(); ++c) {
            inv_count += count_dist[c] / static_cast<double>(c + 1);
        }
        expectation += m_j[static_cast<size_t>(j)] * used_prob[static_cast<size_t>(j)] * inv_count;
    }
    return expectation;
}

double total_variation(const std::map<std::vector<int32_t>, double>& a,
                       const std::map<std::vector<int32_t>, double>& b) {
    double acc = 0.0;
    for (const auto& [k, v] : a) {
        auto it = b.find(k);
        acc += std::abs(v - (it == b.end() ? 0.0 : it->second));
    }
    for (const auto& [k, v] : b) {
        if (a.find(k) == a.end()) {
            acc += v;
        }
    }
    return 0.5 * acc;
}

namespace {

using Dist = std::map<std::vector<int32_t>, double>;

Dist enumerate_emerge(const Policy& policy, const TokenSeq& prompt, const Vocab& vocab, const SamplerConfig& cfg) {
    const int len = cfg.completion_len;
    const int K = cfg.steps;
    std::vector<int32_t> start(static_cast<size_t>(len), vocab.mask_id);
    Dist dist{{start, 1.0}};
    for (int k = 1; k <= K; ++k) {
        const double t = static_cast<double>(K - k + 1) / static_cast<double>(K);
        const double s = static_cast<double>(K - k) / static_cast<double>(K);
        const double alpha_t = cfg.schedule.alpha(t);
        const double alpha_s = cfg.schedule.alpha(s);
        const double stay = (1.0 - alpha_s) / (1.0 - alpha_t);
        const double emit = (alpha_s - alpha_t) / (1.0 - alpha_t);
        Dist next;
        for (const auto& [state, prob] : dist) {
            std::vector<int32_t> ids = prompt.ids;
            ids.insert(ids.end(), state.begin(), state.end());
            const auto logits = policy.logits(ids);
            std::vector<int> masked;
            for (int i = 0; i < len; ++i) {
                if (state[static_cast<size_t>(i)] == vocab.mask_id) {
                    masked.push_back(i);
                }
            }
            if (masked.empty()) {
                next[state] += prob;
                continue;
            }
            // Independent per-position draws: expand the product measure.
            std::vector<std::vector<std::pair<int32_t, double>>> options;
            for (int i : masked) {
                auto probs =
                    row_token_probs(logits, prompt.prompt_len + i, policy.vocab_size, vocab.mask_id, cfg.temperature);
                std::vector<std::pair<int32_t, double>> opts;
                if (stay > 0.0) {
                    opts.emplace_back(vocab.mask_id, stay);
                }
                for (int v = 0; v < policy.vocab_size; ++v) {
                    if (v != vocab.mask_id && probs[static_cast<size_t>(v)] > 0.0) {
                        opts.emplace_back(v, emit * probs[static_cast<size_t>(v)]);
                    }
                }
                options.push_back(std::move(opts));
            }
            std::vector<size_t> pick(options.size(), 0);
            while (true) {
                std::vector<int32_t> child = state;
                double p = prob;
                for (size_t a = 0; a < options.size(); ++a) {
                    const auto& [tok, tp] = options[a][pick[a]];
                    child[static_cast<size_t>(masked[a])] = tok;
                    p *= tp;
                }
                next[child] += p;
                size_t a = 0;
                for (; a < options.size(); ++a) {
                    if (++pick[a] < options[a].size()) {
                        break;
                    }
                    pick[a] = 0;
                }
                if (a == options.size()) {
                    break;
                }
            }
        }
        dist = std::move(next);
    }
    return dist;
}

Dist enumerate_one_step(const Policy& policy, const TokenSeq& prompt, const Vocab& vocab, const SamplerConfig& cfg) {
    const int len = cfg.completion_len;
    std::vector<int32_t> start(static_cast<size_t>(len), vocab.mask_id);
    Dist dist{{start, 1.0}};
    for (int step = 0; step < len; ++step) {
        Dist next;
        for (const auto& [state, prob] : dist) {
            std::vector<int> masked;
            for (int i = 0; i < len; ++i) {
                if (state[static_cast<size_t>(i)] == vocab.mask_id) {
                    masked.push_back(i);
                }
            }
            std::vector<int32_t> ids = prompt.ids;
            ids.insert(ids.end(), state.begin(), state.end());
            const auto logits = policy.logits(ids);
            const double pos_prob = 1.0 / static_cast<double>(masked.size());
            for (int i : masked) {
                const auto probs =
                    row_token_probs(logits, prompt.prompt_len + i, policy.vocab_size, vocab.mask_id, cfg.temperature);
                for (int v = 0; v < policy.vocab_size; ++v) {
                    if (v == vocab.mask_id || probs[static_cast<size_t>(v)] <= 0.0) {
                        continue;
                    }
                    std::vector<int32_t> child = state;
                    child[static_cast<size_t>(i)] = v;
                    next[child] += prob * pos_prob * probs[static_cast<size_t>(v)];
                }
            }
        }
        dist = std::move(next);
    }
    return dist;
}

}  // namespace

std::map<std::vector<int32_t>, double> enumerate_sampler_dist(const Policy& policy, const TokenSeq& prompt,
                                                              const Vocab& vocab, const SamplerConfig& cfg,
                                                              const EnumerationBudget& budget) {
    cfg.validate();
    check_budget(cfg.completion_len, policy.vocab_size, budget);
    Dist dist;
    switch (cfg.kind) {
        case SamplerKind::emerge:
            dist = enumerate_emerge(policy, prompt, vocab, cfg);
            break;
        case SamplerKind::exact_one_step:
            dist = enumerate_one_step(policy, prompt, vocab, cfg);
            break;
        default:
            throw std::invalid_argument("enumerate_sampler_dist: sampler not enumerable");
    }
    double mass = 0.0;
    for (const auto& [k, v] : dist) {
        mass += v;
    }
    if (std::abs(mass - 1.0) > 1e-9) {
        throw std::logic_error("enumerate_sampler_dist: mass " + std::to_string(mass));
    }
    return dist;
}

GradVec<double> finite_diff_grad(const std::function<double(const ParamSet<double>&)>& objective,
                                 const ParamSet<double>& params, double step) {
    ParamSet<double> work = params;
    GradVec<double> grads;
    grads.reserve(params.count());
    for (size_t p = 0; p < params.count(); ++p) {
        Tensor<double> g(work.entries()[p].tensor.shape);
        for (int64_t i = 0; i < g.size(); ++i) {
            double& slot = work.entries()[p].tensor.data[i];
            const double saved = slot;
            slot = saved + step;
            const double hi = objective(work);
            slot = saved - step;
            const double lo = objective(work);
            slot = saved;
            if (!std::isfinite(hi) || !std::isfinite(lo)) {
                throw std::domain_error("finite_diff_grad: non-finite objective");
            }
            g.data[i] = (hi - lo) / (2.0 * step);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

double max_relative_error(const GradVec<double>& a, const GradVec<double>& b, double floor) {
    double worst = 0.0;
    for (size_t p = 0; p < a.size(); ++p) {
        for (int64_t i = 0; i < a[p].size(); ++i) {
            const double x = a[p].data[i];
            const double y = b[p].data[i];
            const double denom = std::max({std::abs(x), std::abs(y), floor});
            worst = std::max(worst, std::abs(x - y) / denom);
        }
    }
    return worst;
}

}  // namespace mgrpo
