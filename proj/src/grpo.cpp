#include "mgrpo/grpo.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "mgrpo/corrupt.hpp"
#include "mgrpo/rng.hpp"

namespace mgrpo {

std::vector<double> advantages(const std::vector<double>& rewards) {
    const size_t G = rewards.size();
    if (G < 2) {
        throw std::invalid_argument("advantages: need at least two rollouts");
    }
    double mean = 0.0;
    for (double r : rewards) {
        mean += r;
    }
    mean /= static_cast<double>(G);
    double var = 0.0;
    for (double r : rewards) {
        var += (r - mean) * (r - mean);
    }
    var /= static_cast<double>(G);
    const double std_dev = std::sqrt(var);
    std::vector<double> out(G, 0.0);
    if (std_dev < 1e-8) {
        return out;  // degenerate group: no gradient signal
    }
    for (size_t i = 0; i < G; ++i) {
        out[i] = (rewards[i] - mean) / std_dev;
    }
    return out;
}

void TrainConfig::validate() const {
    if (group_size < 2) {
        throw std::invalid_argument("train: group_size must be >= 2");
    }
    if (mu < 1) {
        throw std::invalid_argument("train: mu must be >= 1");
    }
    if (!(gamma >= 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("train: gamma outside [0,1)");
    }
    if (epsilon <= 0.0) {
        throw std::invalid_argument("train: epsilon must be positive");
    }
    if (beta < 0.0) {
        throw std::invalid_argument("train: beta must be >= 0");
    }
    if (lr <= 0.0) {
        throw std::invalid_argument("train: lr must be positive");
    }
    if (batch_prompts < 1 || steps < 0 || grad_accum < 1 || checkpoint_every < 1) {
        throw std::invalid_argument("train: bad loop sizes");
    }
    if (batch_prompts % grad_accum != 0) {
        throw std::invalid_argument("train: grad_accum must divide batch_prompts");
    }
    if (reverse_method == ReverseMethod::ar_like) {
        const double t1 = gamma + (1.0 - gamma) / static_cast<double>(mu);
        if (t1 < 0.5) {
            throw std::invalid_argument("train: ar_like reversing needs gamma + (1-gamma)/mu >= 0.5");
        }
    }
    sampler.validate();
}

TrainResult train(const TrainConfig& cfg, const TaskSpec& task, const RewardSpec& reward_spec, const Vocab& vocab,
                  Denoiser<float>& model, const MetricsSink& metrics, const CheckpointSink& checkpoints) {
    cfg.validate();
    task.validate(vocab);
    if (task.total_len() > model.cfg.max_len) {
        throw std::invalid_argument("train: task sequence exceeds model max_len");
    }
    if (cfg.sampler.completion_len != task.completion_len) {
        throw std::invalid_argument("train: sampler completion_len must match task");
    }

    const Denoiser<float> ref = model;  // frozen reference
    Adam<float> optimizer(cfg.lr);
    const TimestepGrid grid = timestep_grid(cfg.gamma, cfg.mu);

    std::deque<double> reward_window;
    TrainResult result;

    for (int step = 0; step < cfg.steps; ++step) {
        const auto t0 = std::chrono::steady_clock::now();
        const Denoiser<float> old_policy = model;  // rollout-time snapshot
        const Policy rollout_policy = old_policy.policy();

        // Rollouts: batch_prompts groups of G completions each.
        std::vector<GroupBatch> groups(static_cast<size_t>(cfg.batch_prompts));
        double reward_sum = 0.0;
        double reward_sq_sum = 0.0;
        int64_t reward_incidents = 0;
        for (int p = 0; p < cfg.batch_prompts; ++p) {
            GroupBatch& group = groups[static_cast<size_t>(p)];
            Example ex = gen_example(
                task, vocab, mix64(cfg.master_seed, 0x9123ull, mix64(static_cast<uint64_t>(step), static_cast<uint64_t>(p))));
            group.prompt = ex.prompt;
            for (int g = 0; g < cfg.group_size; ++g) {
                SamplerConfig scfg = cfg.sampler;
                scfg.seed = mix64(cfg.master_seed, mix64(static_cast<uint64_t>(step), static_cast<uint64_t>(p)),
                                  static_cast<uint64_t>(g));
                TokenSeq rollout = sample(rollout_policy, ex.prompt, vocab, scfg);
                double r = 0.0;
                try {
                    r = reward(rollout, ex.answer, reward_spec, vocab).total;
                } catch (const std::exception&) {
                    r = 0.0;  // reward failures score zero, never crash the run
                    ++reward_incidents;
                }
                group.rollouts.push_back(std::move(rollout));
                group.rewards.push_back(r);
                reward_sum += r;
                reward_sq_sum += r * r;
            }
            group.advantages = advantages(group.rewards);
        }

        // Inner updates over the truncated grid: one ascent per t_j.
        const auto seeds = seed_set(mix64(cfg.master_seed, 0x5e4aull, static_cast<uint64_t>(step)), cfg.mu);
        ObjectiveStats step_stats;
        double grad_norm_acc = 0.0;
        PolicyTriple<float> policies;
        policies.old_policy = &old_policy;
        policies.ref = &ref;
        const int chunk = cfg.batch_prompts / cfg.grad_accum;
        for (int j = 0; j < cfg.mu; ++j) {
            TimestepGrid slice;
            slice.gamma = grid.gamma;
            slice.mu = 1;
            slice.values = {grid.values[static_cast<size_t>(j)]};
            GradVec<float> grads;
            for (int a = 0; a < cfg.grad_accum; ++a) {
                Tape<float> tape(true);
                auto leaves = register_params(tape, model.params);
                policies.theta = &model;
                std::vector<typename Tape<float>::Id> group_objs;
                for (int p = a * chunk; p < (a + 1) * chunk; ++p) {
                    const std::vector<uint64_t> group_seeds = {
                        mix64(seeds[static_cast<size_t>(j)], 0x9009ull, static_cast<uint64_t>(p))};
                    group_objs.push_back(objective_node(tape, leaves, policies, groups[static_cast<size_t>(p)],
                                                        slice, group_seeds, cfg.reverse_method, cfg.beta,
                                                        cfg.epsilon, vocab, &step_stats));
                }
                // Maximize: minimize the negated batch mean.
                auto loss = tape.mul_const(tape.add_list(group_objs),
                                           static_cast<float>(-1.0 / static_cast<double>(chunk)));
                accumulate_grads(grads, backward(tape, loss, leaves));
            }
            if (cfg.grad_accum > 1) {
                for (auto& g : grads) {
                    for (auto& v : g.data) {
                        v /= static_cast<float>(cfg.grad_accum);
                    }
                }
            }
            grad_norm_acc += grad_l2_norm(grads);
            optimizer.step(model.params, grads);
        }

        const int n_rollouts = cfg.batch_prompts * cfg.group_size;
        const double mean_reward = reward_sum / n_rollouts;
        const double var_reward = std::max(0.0, reward_sq_sum / n_rollouts - mean_reward * mean_reward);
        StepMetrics m;
        m.step = step;
        m.mean_reward = mean_reward;
        m.std_reward = std::sqrt(var_reward);
        m.mean_rho = step_stats.n_terms > 0 ? step_stats.sum_rho / static_cast<double>(step_stats.n_terms) : 1.0;
        m.max_rho = step_stats.max_rho;
        m.clip_frac =
            step_stats.n_terms > 0 ? static_cast<double>(step_stats.clip_active) / static_cast<double>(step_stats.n_terms) : 0.0;
        m.mean_kl = step_stats.n_terms > 0 ? step_stats.sum_kl / static_cast<double>(step_stats.n_terms) : 0.0;
        m.clamp_count = step_stats.clamp_events;
        m.reward_incidents = reward_incidents;
        m.grad_norm = grad_norm_acc / static_cast<double>(cfg.mu);
        m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (metrics) {
            metrics(m);
        }
        if (checkpoints && (step + 1) % cfg.checkpoint_every == 0) {
            checkpoints(step + 1, model);
        }

        result.steps_run = step + 1;
        result.final_mean_reward = mean_reward;
        reward_window.push_back(mean_reward);
        if (static_cast<int>(reward_window.size()) > cfg.stop_window) {
            reward_window.pop_front();
        }
        if (cfg.stop_reward >= 0.0 && static_cast<int>(reward_window.size()) == cfg.stop_window) {
            double acc = 0.0;
            for (double r : reward_window) {
                acc += r;
            }
            if (acc / static_cast<double>(cfg.stop_window) > cfg.stop_reward) {
                result.stopped_early = true;
                break;
            }
        }
    }
    if (checkpoints && result.steps_run > 0 && result.steps_run % cfg.checkpoint_every != 0) {
        checkpoints(result.steps_run, model);
    }
    return result;
}

std::vector<double> pretrain(Denoiser<float>& model, const TaskSpec& task, const Vocab& vocab, int steps,
                             int batch_size, double lr, uint64_t master_seed,
                             const std::function<void(int, double)>& on_step) {
    task.validate(vocab);
    if (batch_size < 1) {
        throw std::invalid_argument("pretrain: batch_size must be >= 1");
    }
    Adam<float> optimizer(lr);
    NoiseSchedule schedule{ScheduleKind::linear};
    std::vector<double> losses;
    losses.reserve(static_cast<size_t>(steps));
    Rng rng(mix64(master_seed, 0x9e7eull));
    for (int step = 0; step < steps; ++step) {
        Tape<float> tape(true);
        auto leaves = register_params(tape, model.params);
        std::vector<typename Tape<float>::Id> batch_losses;
        for (int b = 0; b < batch_size; ++b) {
            const uint64_t ex_seed = rng.next_u64();
            Example ex = gen_example(task, vocab, ex_seed);
            TokenSeq full = ex.prompt;
            const auto completion = target_completion(task, vocab, ex.answer);
            full.ids.insert(full.ids.end(), completion.begin(), completion.end());
            // Redraw until at least one completion token is masked; the
            // loss is undefined on empty masks.
            MaskedView view;
            do {
                const double t = std::max(rng.uniform01(), 1e-9);
                view = corrupt(full, t, schedule, vocab, rng.next_u64());
            } while (view.masked_count() == 0);
            batch_losses.push_back(ddm_loss_node(tape, model, leaves, view, full));
        }
        // L_DDM = -E[loss term]; minimize it.
        auto loss = tape.mul_const(tape.add_list(batch_losses),
                                   static_cast<float>(-1.0 / static_cast<double>(batch_size)));
        const double loss_value = static_cast<double>(tape.value(loss).scalar());
        optimizer.step(model.params, backward(tape, loss, leaves));
        losses.push_back(loss_value);
        if (on_step) {
            on_step(step, loss_value);
        }
    }
    return losses;
}

double evaluate_pass_rate(const Denoiser<float>& model, const TaskSpec& task, const RewardSpec& reward_spec,
                          const Vocab& vocab, const SamplerConfig& sampler_cfg, int n_examples, uint64_t seed_base) {
    const Policy policy = model.policy();
    int passed = 0;
    for (int i = 0; i < n_examples; ++i) {
        Example ex = gen_example(task, vocab, mix64(seed_base, 0xeea1ull + static_cast<uint64_t>(i)));
        SamplerConfig cfg = sampler_cfg;
        cfg.seed = mix64(seed_base, 0x5a3eull, static_cast<uint64_t>(i));
        const TokenSeq rollout = sample(policy, ex.prompt, vocab, cfg);
        if (reward(rollout, ex.answer, reward_spec, vocab).correct) {
            ++passed;
        }
    }
    return static_cast<double>(passed) / static_cast<double>(n_examples);
}

}  // namespace mgrpo
