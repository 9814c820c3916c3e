#include "mgrpo/verify.hpp"

#include <cmath>
#include <sstream>

#include "mgrpo/corrupt.hpp"
#include "mgrpo/estimator.hpp"
#include "mgrpo/grpo.hpp"
#include "mgrpo/model.hpp"
#include "mgrpo/oracle.hpp"
#include "mgrpo/reverse.hpp"
#include "mgrpo/rng.hpp"
#include "mgrpo/sampler.hpp"

namespace mgrpo {

namespace {

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(6);
    out << v;
    return out.str();
}

// Tiny double-precision model over a reduced alphabet for enumeration
// checks. Small weights keep context sensitivity mild, which is the
// regime the estimator consistency checks quantify.
Denoiser<double> tiny_model(int vocab_size, uint64_t seed, double weight_std = 0.08) {
    ModelConfig cfg;
    cfg.vocab_size = vocab_size;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_blocks = 1;
    cfg.max_len = 8;
    return Denoiser<double>::random_init(cfg, seed, weight_std);
}

TokenSeq tiny_sequence(const Vocab& vocab, int prompt_len, int completion_len, uint64_t seed) {
    Rng rng(mix64(seed, 0x7e57ull));
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

CheckResult check_reverse_rule_normalization() {
    CheckResult out{"reverse-rule-normalization", false, ""};
    Rng rng(20260113);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double alpha_t = rng.uniform01() * 0.999;
        const double alpha_s = alpha_t + (1.0 - alpha_t) * std::max(rng.uniform01(), 1e-6);
        const int k = 2 + static_cast<int>(rng.below(5));
        std::vector<double> pi(static_cast<size_t>(k));
        double sum = 0.0;
        for (auto& p : pi) {
            p = std::exp(rng.gauss(0.0, 1.0));
            sum += p;
        }
        double pi_mass = 0.0;
        for (auto& p : pi) {
            p /= sum;
            pi_mass += p;
        }
        const double row = (1.0 - alpha_s) / (1.0 - alpha_t) + (alpha_s - alpha_t) / (1.0 - alpha_t) * pi_mass;
        worst = std::max(worst, std::abs(row - 1.0));
    }
    if (worst > 1e-9) {
        out.detail = "random triple row sum off by " + fmt(worst);
        return out;
    }

    // The emerge sampler asserts the same identity at every step.
    const Vocab vocab = Vocab::tiny(5, 4, 3);
    const auto model = tiny_model(vocab.size, 7001);
    const Policy policy = model.policy();
    SamplerConfig cfg;
    cfg.kind = SamplerKind::emerge;
    cfg.completion_len = 4;
    cfg.steps = 8;
    cfg.schedule.kind = ScheduleKind::linear;
    TokenSeq prompt = tiny_sequence(vocab, 2, 0, 11);
    try {
        for (int i = 0; i < 50; ++i) {
            cfg.seed = static_cast<uint64_t>(i);
            sample_emerge(policy, prompt, vocab, cfg);
        }
        cfg.schedule.kind = ScheduleKind::cosine;
        for (int i = 0; i < 50; ++i) {
            cfg.seed = static_cast<uint64_t>(i);
            sample_emerge(policy, prompt, vocab, cfg);
        }
    } catch (const std::exception& e) {
        out.detail = std::string("emerge step violated normalization: ") + e.what();
        return out;
    }
    out.pass = true;
    out.detail = "max |row sum - 1| = " + fmt(worst) + " over 1000 triples and 100 emerge runs";
    return out;
}

CheckResult check_estimator_identities() {
    CheckResult out{"estimator-identities", false, ""};
    const Vocab vocab;
    ModelConfig mc;
    mc.vocab_size = vocab.size;
    mc.d_model = 32;
    mc.n_heads = 2;
    mc.n_blocks = 2;
    mc.max_len = 16;
    const auto model = Denoiser<float>::random_init(mc, 99);
    const TokenSeq o = tiny_sequence(vocab, 4, 8, 42);
    for (int j = 0; j < 8; ++j) {
        ReverseSpec spec;
        spec.method = j % 2 == 0 ? ReverseMethod::random : ReverseMethod::ar_like;
        spec.ratio = 0.6 + 0.05 * j;
        spec.seed = seed_set(mix64(5, static_cast<uint64_t>(j)), 8)[static_cast<size_t>(j)];
        const MaskedView view = reverse(o, spec, vocab);
        if (view.masked_count() == 0) {
            continue;
        }
        const double l_a = ddm_loss(model, view, o);
        const double l_b = ddm_loss(model, view, o);
        const double rho = importance(l_a, l_b);
        const double kl = kl_estimate(l_a, l_b);
        if (rho != 1.0 || kl != 0.0) {
            out.detail = "identical policies gave rho=" + fmt(rho) + " kl=" + fmt(kl);
            return out;
        }
    }
    Rng rng(31337);
    double min_kl = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double delta = rng.gauss(0.0, 3.0);
        min_kl = std::min(min_kl, kl_estimate(delta, 0.0));
    }
    if (min_kl < -1e-12) {
        out.detail = "kl estimate dropped to " + fmt(min_kl);
        return out;
    }
    out.pass = true;
    out.detail = "rho/kl identities bit-exact; min kl over 10k draws = " + fmt(min_kl);
    return out;
}

CheckResult check_mask_statistics() {
    CheckResult out{"mask-statistics", false, ""};
    const Vocab vocab;
    const int len_o = 256;
    const int n_seeds = 10000;
    TokenSeq o = tiny_sequence(vocab, 4, len_o, 1);
    for (const double r : {0.6, 0.8, 1.0}) {
        for (const ReverseMethod method : {ReverseMethod::random, ReverseMethod::ar_like}) {
            std::vector<double> freq(static_cast<size_t>(len_o), 0.0);
            double total = 0.0;
            for (int s = 0; s < n_seeds; ++s) {
                ReverseSpec spec{method, r, mix64(0xabcdull, static_cast<uint64_t>(s))};
                const MaskedView view = reverse(o, spec, vocab);
                total += view.masked_count();
                for (int i = 0; i < len_o; ++i) {
                    freq[static_cast<size_t>(i)] += view.mask[static_cast<size_t>(o.prompt_len + i)];
                }
            }
            const double mean_count = total / n_seeds;
            const double expected = r * len_o;
            if (std::abs(mean_count - expected) > 0.02 * expected) {
                out.detail = reverse_name(method) + " r=" + fmt(r) + ": mean count " + fmt(mean_count) +
                             " vs expected " + fmt(expected);
                return out;
            }
            for (auto& f : freq) {
                f /= n_seeds;
            }
            if (method == ReverseMethod::ar_like) {
                // Fading-out: per-position frequency non-decreasing within
                // a 3-sigma band on each adjacent pair.
                for (int i = 0; i + 1 < len_o; ++i) {
                    const double p0 = freq[static_cast<size_t>(i)];
                    const double p1 = freq[static_cast<size_t>(i + 1)];
                    const double band =
                        3.0 * std::sqrt((p0 * (1 - p0) + p1 * (1 - p1)) / static_cast<double>(n_seeds));
                    if (p1 - p0 < -band) {
                        out.detail = "ar_like frequency decreased at position " + std::to_string(i);
                        return out;
                    }
                }
            } else {
                const double sigma = std::sqrt(r * (1 - r) / static_cast<double>(n_seeds));
                for (int i = 0; i < len_o; ++i) {
                    if (std::abs(freq[static_cast<size_t>(i)] - r) > std::max(3.0 * sigma, 1e-12)) {
                        out.detail = "random frequency off at position " + std::to_string(i) + ": " +
                                     fmt(freq[static_cast<size_t>(i)]) + " vs r=" + fmt(r);
                        return out;
                    }
                }
            }
        }
    }
    out.pass = true;
    out.detail = "expected counts within 2%, ar_like fading monotone, random flat (10k seeds)";
    return out;
}

CheckResult check_elbo_ordering_consistency() {
    CheckResult out{"elbo-ordering-consistency", false, ""};
    const Vocab vocab = Vocab::tiny(5, 4, 3);
    const int nu = 8;
    const int n_seeds = 10000;
    double worst_gap = 1e18;
    double worst_z = 0.0;
    for (int m = 0; m < 20; ++m) {
        const auto model = tiny_model(vocab.size, 1000 + static_cast<uint64_t>(m), 0.03);
        const Policy policy = model.policy();
        const TokenSeq o = tiny_sequence(vocab, 1, 3, 500 + static_cast<uint64_t>(m));

        const double bound = exact_elbo(policy, o, vocab, 256);
        const double loglik = exact_anyorder_loglik(policy, o, vocab);
        worst_gap = std::min(worst_gap, loglik - bound);
        if (bound > loglik + 1e-9) {
            out.detail = "model " + std::to_string(m) + ": bound " + fmt(bound) + " above loglik " + fmt(loglik);
            return out;
        }
        if (std::abs(exact_elbo(policy, o, vocab, 512) - bound) > 1e-6) {
            out.detail = "model " + std::to_string(m) + ": integration not converged at resolution 256";
            return out;
        }

        const ViewLossFn loss = [&](const MaskedView& view) { return ddm_loss(model, view, o); };
        double sum = 0.0;
        double sq = 0.0;
        for (int s = 0; s < n_seeds; ++s) {
            const double value = elbo_estimate(loss, o, vocab, nu, mix64(777, static_cast<uint64_t>(m),
                                                                         static_cast<uint64_t>(s)))
                                     .value;
            sum += value;
            sq += value * value;
        }
        const double mc_mean = sum / n_seeds;
        const double mc_std = std::sqrt(std::max(0.0, sq / n_seeds - mc_mean * mc_mean));
        const double band = 3.0 * mc_std / std::sqrt(static_cast<double>(n_seeds));
        const double z = std::abs(mc_mean - bound);
        worst_z = std::max(worst_z, band > 0 ? z / band : 0.0);
        if (z > band) {
            out.detail = "model " + std::to_string(m) + ": MC mean " + fmt(mc_mean) + " vs bound " + fmt(bound) +
                         " exceeds 3 sigma band " + fmt(band);
            return out;
        }
    }
    out.pass = true;
    out.detail = "20 models: min(loglik - bound) = " + fmt(worst_gap) +
                 ", worst |MC - bound| at " + fmt(worst_z * 100.0) + "% of the 3-sigma band";
    return out;
}

CheckResult check_gradient_fidelity() {
    CheckResult out{"gradient-fidelity", false, ""};
    const Vocab vocab = Vocab::tiny(6, 5, 4);

    // Loss-term gradient against central differences.
    {
        const auto model = tiny_model(vocab.size, 2024, 0.2);
        const TokenSeq o = tiny_sequence(vocab, 2, 4, 9);
        const MaskedView view = reverse(o, {ReverseMethod::random, 0.6, 21}, vocab);
        Tape<double> tape(true);
        auto leaves = register_params(tape, model.params);
        const auto grads = backward(tape, ddm_loss_node(tape, model, leaves, view, o), leaves);
        const auto fd = finite_diff_grad(
            [&](const ParamSet<double>& p) {
                Denoiser<double> probe;
                probe.cfg = model.cfg;
                probe.params = p;
                return ddm_loss(probe, view, o);
            },
            model.params, 1e-4);
        const double err = max_relative_error(grads, fd);
        if (err > 1e-3) {
            out.detail = "loss-term gradient error " + fmt(err);
            return out;
        }
        out.detail = "loss grad err " + fmt(err);
    }

    // Full objective gradient, G=2, mu=2, three distinct policies.
    {
        const auto theta = tiny_model(vocab.size, 3001, 0.2);
        const auto old_policy = tiny_model(vocab.size, 3002, 0.2);
        const auto ref = tiny_model(vocab.size, 3003, 0.2);
        GroupBatch group;
        group.prompt = tiny_sequence(vocab, 2, 0, 70);
        group.rollouts = {tiny_sequence(vocab, 2, 4, 71), tiny_sequence(vocab, 2, 4, 72)};
        for (auto& r : group.rollouts) {
            r.ids[0] = group.prompt.ids[0];
            r.ids[1] = group.prompt.ids[1];
        }
        group.rewards = {0.0, 2.0};
        group.advantages = advantages(group.rewards);
        const TimestepGrid grid = timestep_grid(0.5, 2);
        const auto seeds = seed_set(404, 2);

        auto eval = [&](const ParamSet<double>& p) {
            Denoiser<double> probe;
            probe.cfg = theta.cfg;
            probe.params = p;
            PolicyTriple<double> pol{&probe, &old_policy, &ref};
            Tape<double> tape(false);
            auto leaves = register_params(tape, probe.params);
            return tape.value(objective_node(tape, leaves, pol, group, grid, seeds, ReverseMethod::random, 0.05,
                                             0.2, vocab, nullptr))
                .scalar();
        };
        PolicyTriple<double> pol{&theta, &old_policy, &ref};
        Tape<double> tape(true);
        auto leaves = register_params(tape, theta.params);
        auto obj = objective_node(tape, leaves, pol, group, grid, seeds, ReverseMethod::random, 0.05, 0.2, vocab,
                                  nullptr);
        const auto grads = backward(tape, obj, leaves);
        const auto fd = finite_diff_grad(eval, theta.params, 1e-4);
        const double err = max_relative_error(grads, fd);
        if (err > 1e-3) {
            out.detail = "objective gradient error " + fmt(err);
            return out;
        }
        out.detail += ", objective grad err " + fmt(err);
    }
    out.pass = true;
    return out;
}

CheckResult check_sampler_fidelity() {
    CheckResult out{"sampler-fidelity", false, ""};
    const Vocab vocab = Vocab::tiny(5, 4, 3);
    const auto model = tiny_model(vocab.size, 888, 0.15);
    const Policy policy = model.policy();
    const TokenSeq prompt = tiny_sequence(vocab, 2, 0, 55);

    SamplerConfig emerge;
    emerge.kind = SamplerKind::emerge;
    emerge.completion_len = 2;
    emerge.steps = 8;
    emerge.schedule.kind = ScheduleKind::linear;

    SamplerConfig one_step;
    one_step.kind = SamplerKind::exact_one_step;
    one_step.completion_len = 2;

    const auto emerge_dist = enumerate_sampler_dist(policy, prompt, vocab, emerge);
    const auto exact_dist = enumerate_sampler_dist(policy, prompt, vocab, one_step);
    const double tv = total_variation(emerge_dist, exact_dist);
    if (tv > 0.05) {
        out.detail = "total variation " + fmt(tv) + " above 0.05";
        return out;
    }
    out.pass = true;
    out.detail = "emerge(K=8) vs one-step TV = " + fmt(tv);
    return out;
}

bool run_verify(std::ostream& report) {
    const CheckResult results[] = {
        check_reverse_rule_normalization(), check_estimator_identities(), check_mask_statistics(),
        check_elbo_ordering_consistency(),  check_gradient_fidelity(),    check_sampler_fidelity(),
    };
    bool all_pass = true;
    for (const auto& r : results) {
        report << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
        all_pass = all_pass && r.pass;
    }
    return all_pass;
}

}  // namespace mgrpo
