#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mgrpo/estimator.hpp"
#include "mgrpo/model.hpp"
#include "mgrpo/reverse.hpp"
#include "mgrpo/sampler.hpp"
#include "mgrpo/tasks.hpp"

namespace mgrpo {

/// G rollouts for one prompt with rewards and normalized advantages.
struct GroupBatch {
    TokenSeq prompt;
    std::vector<TokenSeq> rollouts;
    std::vector<double> rewards;
    std::vector<double> advantages;
};

/// Group-relative advantages: (r - mean) / population std. A degenerate
/// group (std below 1e-8) maps to all-zero advantages and contributes no
/// reward gradient. Requires at least two rollouts.
std::vector<double> advantages(const std::vector<double>& rewards);

struct TrainConfig {
    int group_size = 6;  // G
    int mu = 6;
    double gamma = 0.6;
    double beta = 0.01;
    double epsilon = 0.2;
    double lr = 1e-3;
    int batch_prompts = 4;
    int steps = 2000;
    int grad_accum = 1;
    int checkpoint_every = 500;
    uint64_t master_seed = 1;
    ReverseMethod reverse_method = ReverseMethod::ar_like;
    SamplerConfig sampler;

    // Optional early stop on the rolling mean reward; disabled when < 0.
    double stop_reward = -1.0;
    int stop_window = 50;

    void validate() const;
};

/// Live policy, rollout-time snapshot, frozen reference.
template <typename T>
struct PolicyTriple {
    const Denoiser<T>* theta = nullptr;
    const Denoiser<T>* old_policy = nullptr;
    const Denoiser<T>* ref = nullptr;
};

struct ObjectiveStats {
    double sum_rho = 0.0;
    double max_rho = 0.0;
    double sum_kl = 0.0;
    int64_t n_terms = 0;
    int64_t clip_active = 0;
    int64_t clamp_events = 0;
    std::vector<EstimateRecord> records;

    void merge(const ObjectiveStats& o) {
        sum_rho += o.sum_rho;
        max_rho = std::max(max_rho, o.max_rho);
        sum_kl += o.sum_kl;
        n_terms += o.n_terms;
        clip_active += o.clip_active;
        clamp_events += o.clamp_events;
    }
};

/// The scalar objective to maximize for one group over a timestep grid:
///   (1/G) sum_i (1/|o_i|) sum_j [ clipped_term(rho_ij, A_i) - beta * KL_ij ]
/// Every inner term j uses one masked view, built from seed S_j at ratio
/// t_j and shared bit-exactly by the three policies. The training loop
/// calls this with single-element grids, one per inner update.
template <typename T>
typename Tape<T>::Id objective_node(Tape<T>& tape, const ParamLeaves<T>& theta_leaves,
                                    const PolicyTriple<T>& policies, const GroupBatch& group,
                                    const TimestepGrid& grid, const std::vector<uint64_t>& seeds,
                                    ReverseMethod method, double beta, double epsilon, const Vocab& vocab,
                                    ObjectiveStats* stats) {
    if (seeds.size() != grid.values.size()) {
        throw std::invalid_argument("objective: seed count must match grid size");
    }
    if (group.advantages.size() != group.rollouts.size()) {
        throw std::invalid_argument("objective: advantages not computed");
    }
    const int G = static_cast<int>(group.rollouts.size());
    std::vector<typename Tape<T>::Id> per_rollout;
    per_rollout.reserve(static_cast<size_t>(G));
    int64_t clamp_events = 0;
    for (int i = 0; i < G; ++i) {
        const TokenSeq& o = group.rollouts[static_cast<size_t>(i)];
        const double adv = group.advantages[static_cast<size_t>(i)];
        std::vector<typename Tape<T>::Id> terms;
        terms.reserve(grid.values.size());
        for (size_t j = 0; j < grid.values.size(); ++j) {
            ReverseSpec spec;
            spec.method = method;
            spec.ratio = grid.values[j];
            spec.seed = mix64(seeds[j], static_cast<uint64_t>(i));
            MaskedView view = reverse(o, spec, vocab);
            // Random reversing can draw an empty mask on short completions;
            // the loss term is undefined there, so redraw deterministically.
            for (uint64_t attempt = 1; view.masked_count() == 0; ++attempt) {
                spec.seed = mix64(seeds[j], static_cast<uint64_t>(i), attempt);
                view = reverse(o, spec, vocab);
            }

            const double l_old = ddm_loss(*policies.old_policy, view, o);
            const double l_ref = ddm_loss(*policies.ref, view, o);
            auto l_theta = ddm_loss_node(tape, *policies.theta, theta_leaves, view, o);

            auto rho = tape.exp_clamped(tape.add_const(l_theta, static_cast<T>(-l_old)),
                                        static_cast<T>(kExpClampLo), static_cast<T>(kExpClampHi), &clamp_events);
            auto unclipped = tape.mul_const(rho, static_cast<T>(adv));
            auto clipped = tape.mul_const(
                tape.clip_const(rho, static_cast<T>(1.0 - epsilon), static_cast<T>(1.0 + epsilon)),
                static_cast<T>(adv));
            auto reward_term = tape.min2(unclipped, clipped);

            auto delta = tape.const_minus(static_cast<T>(l_ref), l_theta);
            auto kl = tape.sub(tape.exp_clamped(delta, static_cast<T>(kExpClampLo), static_cast<T>(kExpClampHi),
                                                &clamp_events),
                               tape.add_const(delta, T{1}));
            terms.push_back(tape.sub(reward_term, tape.mul_const(kl, static_cast<T>(beta))));

            if (stats != nullptr) {
                EstimateRecord rec;
                rec.t = grid.values[j];
                rec.l_theta = static_cast<double>(tape.value(l_theta).scalar());
                rec.l_old = l_old;
                rec.l_ref = l_ref;
                rec.rho = static_cast<double>(tape.value(rho).scalar());
                rec.kl = static_cast<double>(tape.value(kl).scalar());
                rec.masked_count = view.masked_count();
                stats->records.push_back(rec);
                stats->sum_rho += rec.rho;
                stats->max_rho = std::max(stats->max_rho, rec.rho);
                stats->sum_kl += rec.kl;
                stats->n_terms += 1;
                if (static_cast<double>(tape.value(clipped).scalar()) <
                    static_cast<double>(tape.value(unclipped).scalar())) {
                    stats->clip_active += 1;
                }
            }
        }
        per_rollout.push_back(
            tape.mul_const(tape.add_list(terms), static_cast<T>(1.0 / static_cast<double>(o.completion_len()))));
    }
    if (stats != nullptr) {
        stats->clamp_events += clamp_events;
    }
    auto total = tape.mul_const(tape.add_list(per_rollout), static_cast<T>(1.0 / static_cast<double>(G)));
    if (!tape.value(total).all_finite()) {
        throw std::runtime_error("objective: non-finite value");
    }
    return total;
}

struct StepMetrics {
    int step = 0;
    double mean_reward = 0.0;
    double std_reward = 0.0;
    double mean_rho = 0.0;
    double max_rho = 0.0;
    double clip_frac = 0.0;
    double mean_kl = 0.0;
    int64_t clamp_count = 0;
    int64_t reward_incidents = 0;
    double grad_norm = 0.0;
    double wall_ms = 0.0;
};

using MetricsSink = std::function<void(const StepMetrics&)>;
using CheckpointSink = std::function<void(int step, const Denoiser<float>& model)>;

struct TrainResult {
    int steps_run = 0;
    double final_mean_reward = 0.0;
    bool stopped_early = false;
};

/// One MaskGRPO training run. Outer steps snapshot the rollout policy,
/// sample a prompt mini-batch with G completions each, score and normalize
/// advantages, then run mu inner gradient ascents over the truncated
/// timestep grid. The reference policy is the model state at entry and is
/// never updated.
TrainResult train(const TrainConfig& cfg, const TaskSpec& task, const RewardSpec& reward_spec, const Vocab& vocab,
                  Denoiser<float>& model, const MetricsSink& metrics = nullptr,
                  const CheckpointSink& checkpoints = nullptr);

/// Masked-denoising pretraining on task data with uniformly drawn
/// timesteps. Returns the per-step losses.
std::vector<double> pretrain(Denoiser<float>& model, const TaskSpec& task, const Vocab& vocab, int steps,
                             int batch_size, double lr, uint64_t master_seed,
                             const std::function<void(int, double)>& on_step = nullptr);

/// Greedy pass@1 over a held-out seed range.
double evaluate_pass_rate(const Denoiser<float>& model, const TaskSpec& task, const RewardSpec& reward_spec,
                          const Vocab& vocab, const SamplerConfig& sampler_cfg, int n_examples, uint64_t seed_base);

}  // namespace mgrpo
