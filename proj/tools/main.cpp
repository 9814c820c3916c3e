#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "mgrpo/checkpoint.hpp"
#include "mgrpo/config.hpp"
#include "mgrpo/grpo.hpp"
#include "mgrpo/metrics.hpp"
#include "mgrpo/reverse.hpp"
#include "mgrpo/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string preset = "text";
    std::string out_dir;
    std::optional<uint64_t> seed;
    std::optional<int> steps;
    std::optional<std::string> sampler;
    std::optional<double> gamma;
    std::optional<int> mu;
    std::optional<double> epsilon;
    std::optional<double> beta;
    std::optional<std::string> task;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "config file (flat key = value)");
    cmd->add_option("--preset", opts.preset, "built-in preset: text | vision_style");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "master seed");
    cmd->add_option("--steps", opts.steps, "outer step count");
    cmd->add_option("--sampler", opts.sampler, "rollout sampler");
    cmd->add_option("--gamma", opts.gamma, "timestep truncation");
    cmd->add_option("--mu", opts.mu, "inner updates per step");
    cmd->add_option("--epsilon", opts.epsilon, "clip range");
    cmd->add_option("--beta", opts.beta, "KL coefficient");
    cmd->add_option("--task", opts.task, "task kind");
}

mgrpo::RunConfig resolve_config(const CommonOpts& opts) {
    mgrpo::RunConfig cfg =
        opts.config_path.empty() ? mgrpo::preset_config(opts.preset) : mgrpo::load_config(opts.config_path);
    if (opts.seed) {
        cfg.train.master_seed = *opts.seed;
    }
    if (opts.steps) {
        cfg.train.steps = *opts.steps;
    }
    if (opts.sampler) {
        mgrpo::apply_config_key(cfg, "sampler", *opts.sampler);
    }
    if (opts.gamma) {
        mgrpo::apply_config_key(cfg, "gamma", std::to_string(*opts.gamma));
    }
    if (opts.mu) {
        cfg.train.mu = *opts.mu;
    }
    if (opts.epsilon) {
        cfg.train.epsilon = *opts.epsilon;
    }
    if (opts.beta) {
        cfg.train.beta = *opts.beta;
    }
    if (opts.task) {
        mgrpo::apply_config_key(cfg, "task", *opts.task);
    }
    cfg.validate();
    return cfg;
}

std::string resolve_out_dir(const CommonOpts& opts, const std::string& fallback_name) {
    if (!opts.out_dir.empty()) {
        return opts.out_dir;
    }
    const char* root = std::getenv(mgrpo::kOutRootEnv);
    const fs::path base = root != nullptr ? fs::path(root) : fs::path("runs");
    return (base / fallback_name).string();
}

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

mgrpo::RunManifest make_manifest(const mgrpo::RunConfig& cfg, const std::string& out_dir) {
    mgrpo::RunManifest manifest;
    manifest.config = cfg;
    manifest.master_seed = cfg.train.master_seed;
    manifest.code_version = mgrpo::kCodeVersion;
    manifest.started_at = timestamp_now();
    manifest.out_dir = out_dir;
    return manifest;
}

int cmd_pretrain(const CommonOpts& opts) {
    const mgrpo::RunConfig cfg = resolve_config(opts);
    const std::string out_dir = resolve_out_dir(opts, "pretrain");
    fs::create_directories(out_dir);
    write_manifest(make_manifest(cfg, out_dir), out_dir + "/manifest.json");

    const mgrpo::Vocab vocab;
    auto model = mgrpo::Denoiser<float>::random_init(cfg.model, cfg.train.master_seed);
    std::ofstream losses(out_dir + "/pretrain_metrics.jsonl");
    const auto t0 = std::chrono::steady_clock::now();
    mgrpo::pretrain(model, cfg.task, vocab, cfg.pretrain_steps, cfg.pretrain_batch, cfg.pretrain_lr,
                    cfg.train.master_seed, [&](int step, double loss) {
                        losses << json{{"step", step}, {"loss", loss}}.dump() << "\n";
                        if ((step + 1) % 100 == 0) {
                            std::cout << "pretrain step " << (step + 1) << "/" << cfg.pretrain_steps
                                      << " loss " << loss << "\n";
                        }
                    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    mgrpo::ModelMeta meta;
    meta.cfg = cfg.model;
    meta.vocab = vocab;
    meta.schedule = cfg.train.sampler.schedule.kind;
    meta.step = model.params.step;
    const std::string ckpt = out_dir + "/pretrained.ckpt";
    mgrpo::save_model(ckpt, model, meta);
    std::cout << "pretrained " << cfg.pretrain_steps << " steps in " << secs << " s -> " << ckpt << "\n";
    return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& model_path) {
    const mgrpo::RunConfig cfg = resolve_config(opts);
    const std::string out_dir = resolve_out_dir(opts, "train");
    fs::create_directories(out_dir);
    write_manifest(make_manifest(cfg, out_dir), out_dir + "/manifest.json");

    const mgrpo::Vocab vocab;
    mgrpo::Denoiser<float> model;
    if (model_path.empty()) {
        throw std::runtime_error("train: --model checkpoint required (run pretrain first)");
    }
    model = mgrpo::load_model(model_path).first;

    mgrpo::MetricsWriter metrics(out_dir + "/metrics.jsonl");
    const auto result = mgrpo::train(
        cfg.train, cfg.task, cfg.reward, vocab, model, [&](const mgrpo::StepMetrics& m) { metrics.write(m); },
        [&](int step, const mgrpo::Denoiser<float>& snapshot) {
            mgrpo::ModelMeta meta;
            meta.cfg = cfg.model;
            meta.vocab = vocab;
            meta.schedule = cfg.train.sampler.schedule.kind;
            meta.step = snapshot.params.step;
            mgrpo::save_model(out_dir + "/ckpt_" + std::to_string(step) + ".ckpt", snapshot, meta);
        });
    mgrpo::ModelMeta meta;
    meta.cfg = cfg.model;
    meta.vocab = vocab;
    meta.schedule = cfg.train.sampler.schedule.kind;
    meta.step = model.params.step;
    mgrpo::save_model(out_dir + "/final.ckpt", model, meta);
    std::cout << "trained " << result.steps_run << " steps, final mean reward " << result.final_mean_reward
              << (result.stopped_early ? " (early stop)" : "") << "\n";
    return 0;
}

int cmd_rollout(const CommonOpts& opts, const std::string& model_path, int count, double temperature) {
    const mgrpo::RunConfig cfg = resolve_config(opts);
    const mgrpo::Vocab vocab;
    auto [model, meta] = mgrpo::load_model(model_path);
    const mgrpo::Policy policy = model.policy();
    for (int i = 0; i < count; ++i) {
        mgrpo::Example ex = mgrpo::gen_example(cfg.task, vocab,
                                               mgrpo::mix64(cfg.train.master_seed, 0x2011ull, static_cast<uint64_t>(i)));
        mgrpo::SamplerConfig scfg = cfg.train.sampler;
        scfg.temperature = temperature;
        scfg.seed = mgrpo::mix64(cfg.train.master_seed, 0x2012ull, static_cast<uint64_t>(i));
        mgrpo::SampleTrace trace;
        const mgrpo::TokenSeq rollout = mgrpo::sample(policy, ex.prompt, vocab, scfg, &trace);
        const auto score = mgrpo::reward(rollout, ex.answer, cfg.reward, vocab);
        json rec;
        rec["prompt_ids"] = std::vector<int32_t>(rollout.ids.begin(), rollout.ids.begin() + rollout.prompt_len);
        rec["completion_ids"] = std::vector<int32_t>(rollout.ids.begin() + rollout.prompt_len, rollout.ids.end());
        rec["text"] = vocab.decode(rollout.ids);
        rec["mask_counts"] = trace.mask_counts;
        rec["reward"] = score.total;
        std::cout << rec.dump() << "\n";
    }
    return 0;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& model_path, int count) {
    const mgrpo::RunConfig cfg = resolve_config(opts);
    const mgrpo::Vocab vocab;
    auto [model, meta] = mgrpo::load_model(model_path);
    mgrpo::SamplerConfig scfg = cfg.train.sampler;
    scfg.temperature = 0.0;  // greedy evaluation
    // Held-out seed range, disjoint from training prompts.
    const uint64_t held_out = mgrpo::mix64(cfg.train.master_seed, 0xd15c0ull);
    const double pass_rate =
        mgrpo::evaluate_pass_rate(model, cfg.task, cfg.reward, vocab, scfg, count, held_out);
    std::cout << json{{"task", mgrpo::task_name(cfg.task.kind)}, {"n", count}, {"pass_at_1", pass_rate}}.dump()
              << "\n";
    return 0;
}

int cmd_verify() {
    const bool ok = mgrpo::run_verify(std::cout);
    std::cout << (ok ? "verify: all checks passed\n" : "verify: FAILURES\n");
    return ok ? 0 : 1;
}

int cmd_inspect_masks(const CommonOpts& opts, int length, int rows) {
    const mgrpo::RunConfig cfg = resolve_config(opts);
    const mgrpo::Vocab vocab;
    mgrpo::TokenSeq o;
    o.prompt_len = 0;
    o.ids.assign(static_cast<size_t>(length), vocab.pad_id);
    for (const double r : {0.5, 0.6, 0.8, 1.0}) {
        for (const auto method : {mgrpo::ReverseMethod::ar_like, mgrpo::ReverseMethod::random}) {
            std::cout << mgrpo::reverse_name(method) << " r=" << r << "\n";
            for (int row = 0; row < rows; ++row) {
                mgrpo::ReverseSpec spec{method, r,
                                        mgrpo::mix64(cfg.train.master_seed, static_cast<uint64_t>(row))};
                const mgrpo::MaskedView view = mgrpo::reverse(o, spec, vocab);
                std::string line;
                for (int i = 0; i < length; ++i) {
                    line += view.mask[static_cast<size_t>(i)] ? "■" : "·";
                }
                std::cout << "  " << line << "\n";
            }
        }
    }
    return 0;
}

int cmd_plot(const std::string& metrics_path, const std::string& out_path) {
    std::ifstream in(metrics_path);
    if (!in) {
        throw std::runtime_error("cannot open metrics: " + metrics_path);
    }
    std::vector<double> steps;
    std::vector<double> rewards;
    std::vector<double> kls;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const json j = json::parse(line);
        steps.push_back(j.at("step").get<double>());
        rewards.push_back(j.at("mean_reward").get<double>());
        kls.push_back(j.at("mean_kl").get<double>());
    }
    if (steps.empty()) {
        throw std::runtime_error("plot: metrics stream is empty");
    }
    auto polyline = [&](const std::vector<double>& ys, double w, double h, double x0, double y0) {
        double lo = ys[0];
        double hi = ys[0];
        for (double y : ys) {
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
        if (hi - lo < 1e-12) {
            hi = lo + 1.0;
        }
        std::string pts;
        for (size_t i = 0; i < ys.size(); ++i) {
            const double px = x0 + w * static_cast<double>(i) / std::max<size_t>(1, ys.size() - 1);
            const double py = y0 + h - h * (ys[i] - lo) / (hi - lo);
            pts += std::to_string(px) + "," + std::to_string(py) + " ";
        }
        return pts;
    };
    std::ofstream svg(out_path);
    if (!svg) {
        throw std::runtime_error("cannot write plot: " + out_path);
    }
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='640' height='480' viewBox='0 0 640 480'>\n"
        << "<rect width='640' height='480' fill='white'/>\n"
        << "<text x='40' y='24' font-size='14'>mean reward</text>\n"
        << "<polyline fill='none' stroke='#1f77b4' stroke-width='1.5' points='"
        << polyline(rewards, 560, 170, 40, 40) << "'/>\n"
        << "<text x='40' y='264' font-size='14'>mean KL</text>\n"
        << "<polyline fill='none' stroke='#d62728' stroke-width='1.5' points='"
        << polyline(kls, 560, 170, 40, 280) << "'/>\n"
        << "</svg>\n";
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Masked discrete-diffusion lab: pretraining, group-relative policy optimization, and oracle verification"};
    app.require_subcommand(1);

    CommonOpts pretrain_opts;
    auto* pre = app.add_subcommand("pretrain", "pretrain the denoiser on task data");
    add_common(pre, pretrain_opts);

    CommonOpts train_opts;
    std::string train_model;
    auto* tr = app.add_subcommand("train", "policy optimization from a pretrained checkpoint");
    add_common(tr, train_opts);
    tr->add_option("--model", train_model, "pretrained checkpoint path")->required();

    CommonOpts rollout_opts;
    std::string rollout_model;
    int rollout_count = 8;
    double rollout_temp = 1.0;
    auto* ro = app.add_subcommand("rollout", "sample completions as JSONL records");
    add_common(ro, rollout_opts);
    ro->add_option("--model", rollout_model, "checkpoint path")->required();
    ro->add_option("--n", rollout_count, "number of rollouts");
    ro->add_option("--temperature", rollout_temp, "sampling temperature");

    CommonOpts eval_opts;
    std::string eval_model;
    int eval_count = 200;
    auto* ev = app.add_subcommand("evaluate", "pass@1 on held-out prompts");
    add_common(ev, eval_opts);
    ev->add_option("--model", eval_model, "checkpoint path")->required();
    ev->add_option("--n", eval_count, "number of held-out prompts");

    app.add_subcommand("verify", "run the oracle suite");

    CommonOpts inspect_opts;
    int inspect_len = 48;
    int inspect_rows = 4;
    auto* im = app.add_subcommand("inspect-masks", "render reversing masks as text rows");
    add_common(im, inspect_opts);
    im->add_option("--length", inspect_len, "sequence length to render");
    im->add_option("--rows", inspect_rows, "seeds per ratio");

    std::string plot_metrics;
    std::string plot_out = "curves.svg";
    auto* pl = app.add_subcommand("plot", "emit reward/KL curves as SVG");
    pl->add_option("--metrics", plot_metrics, "metrics.jsonl path")->required();
    pl->add_option("--out-svg", plot_out, "output SVG path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (pre->parsed()) {
            return cmd_pretrain(pretrain_opts);
        }
        if (tr->parsed()) {
            return cmd_train(train_opts, train_model);
        }
        if (ro->parsed()) {
            return cmd_rollout(rollout_opts, rollout_model, rollout_count, rollout_temp);
        }
        if (ev->parsed()) {
            return cmd_evaluate(eval_opts, eval_model, eval_count);
        }
        if (app.get_subcommand("verify")->parsed()) {
            return cmd_verify();
        }
        if (im->parsed()) {
            return cmd_inspect_masks(inspect_opts, inspect_len, inspect_rows);
        }
        if (pl->parsed()) {
            return cmd_plot(plot_metrics, plot_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
