#include "mgrpo/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mgrpo {

using nlohmann::json;

void RunConfig::validate() const {
    Vocab vocab;
    train.validate();
    task.validate(vocab);
    if (train.sampler.completion_len != task.completion_len) {
        throw std::invalid_argument("config: sampler completion_len must equal task completion_len");
    }
    if (task.total_len() > model.max_len) {
        throw std::invalid_argument("config: task sequence exceeds model max_len");
    }
    if (model.vocab_size != vocab.size) {
        throw std::invalid_argument("config: model vocab_size must match the task vocabulary");
    }
    if (model.d_model % model.n_heads != 0) {
        throw std::invalid_argument("config: model_width must be divisible by model_heads");
    }
    if (pretrain_steps < 0 || pretrain_batch < 1 || pretrain_lr <= 0.0) {
        throw std::invalid_argument("config: bad pretraining settings");
    }
}

RunConfig preset_config(const std::string& name) {
    RunConfig cfg;
    cfg.task.kind = TaskKind::sort_digits;
    cfg.task.prompt_min = 3;
    cfg.task.prompt_max = 3;
    cfg.task.completion_len = 8;
    cfg.train.sampler.completion_len = cfg.task.completion_len;
    if (name == "text") {
        cfg.train.group_size = 6;
        cfg.train.mu = 6;
        cfg.train.gamma = 0.6;
        cfg.train.epsilon = 0.2;
        cfg.train.beta = 0.01;
        cfg.train.reverse_method = ReverseMethod::ar_like;
        cfg.train.sampler.kind = SamplerKind::semi_ar;
        cfg.train.sampler.block_len = 8;
        cfg.train.sampler.tokens_per_step = 2;
        cfg.train.sampler.temperature = 1.0;
    } else if (name == "vision_style") {
        cfg.train.group_size = 9;
        cfg.train.mu = 8;
        cfg.train.gamma = 0.8;
        cfg.train.epsilon = 0.05;
        cfg.train.beta = 0.01;
        cfg.train.reverse_method = ReverseMethod::random;
        cfg.train.sampler.kind = SamplerKind::emerge;
        cfg.train.sampler.steps = 12;
        cfg.train.sampler.schedule.kind = ScheduleKind::cosine;
        cfg.train.sampler.temperature = 1.0;
    } else {
        throw std::invalid_argument("unknown preset: " + name);
    }
    return cfg;
}

namespace {

int parse_int(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument("trailing");
        }
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" + value + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const uint64_t v = std::stoull(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument("trailing");
        }
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' expects an unsigned integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument("trailing");
        }
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + value + "'");
    }
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto& t = cfg.train;
    if (key == "task") {
        cfg.task.kind = task_from_name(value);
    } else if (key == "prompt_min") {
        cfg.task.prompt_min = parse_int(key, value);
    } else if (key == "prompt_max") {
        cfg.task.prompt_max = parse_int(key, value);
    } else if (key == "completion_len") {
        cfg.task.completion_len = parse_int(key, value);
        t.sampler.completion_len = cfg.task.completion_len;
    } else if (key == "group_size") {
        t.group_size = parse_int(key, value);
    } else if (key == "mu") {
        t.mu = parse_int(key, value);
    } else if (key == "gamma") {
        t.gamma = parse_double(key, value);
        if (!(t.gamma >= 0.0 && t.gamma < 1.0)) {
            throw std::invalid_argument("config: key 'gamma' must lie in [0,1)");
        }
    } else if (key == "beta") {
        t.beta = parse_double(key, value);
    } else if (key == "epsilon") {
        t.epsilon = parse_double(key, value);
    } else if (key == "lr") {
        t.lr = parse_double(key, value);
    } else if (key == "batch_prompts") {
        t.batch_prompts = parse_int(key, value);
    } else if (key == "steps") {
        t.steps = parse_int(key, value);
    } else if (key == "grad_accum") {
        t.grad_accum = parse_int(key, value);
    } else if (key == "checkpoint_every") {
        t.checkpoint_every = parse_int(key, value);
    } else if (key == "master_seed") {
        t.master_seed = parse_u64(key, value);
    } else if (key == "reverse") {
        t.reverse_method = reverse_from_name(value);
    } else if (key == "sampler") {
        t.sampler.kind = sampler_from_name(value);
    } else if (key == "block_len") {
        t.sampler.block_len = parse_int(key, value);
    } else if (key == "tokens_per_step") {
        t.sampler.tokens_per_step = parse_int(key, value);
    } else if (key == "sampler_steps") {
        t.sampler.steps = parse_int(key, value);
    } else if (key == "temperature") {
        t.sampler.temperature = parse_double(key, value);
    } else if (key == "schedule") {
        t.sampler.schedule.kind = schedule_from_name(value);
    } else if (key == "gumbel_noise") {
        t.sampler.gumbel_noise = parse_int(key, value) != 0;
    } else if (key == "stop_reward") {
        t.stop_reward = parse_double(key, value);
    } else if (key == "stop_window") {
        t.stop_window = parse_int(key, value);
    } else if (key == "reward_correct_w") {
        cfg.reward.correct_weight = parse_double(key, value);
    } else if (key == "reward_format_w") {
        cfg.reward.format_weight = parse_double(key, value);
    } else if (key == "model_width") {
        cfg.model.d_model = parse_int(key, value);
    } else if (key == "model_blocks") {
        cfg.model.n_blocks = parse_int(key, value);
    } else if (key == "model_heads") {
        cfg.model.n_heads = parse_int(key, value);
    } else if (key == "max_len") {
        cfg.model.max_len = parse_int(key, value);
    } else if (key == "pretrain_steps") {
        cfg.pretrain_steps = parse_int(key, value);
    } else if (key == "pretrain_batch") {
        cfg.pretrain_batch = parse_int(key, value);
    } else if (key == "pretrain_lr") {
        cfg.pretrain_lr = parse_double(key, value);
    } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config: " + path);
    }
    // First pass finds the preset so later keys override it.
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string preset = "text";
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: line " + std::to_string(line_no) + " is not 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw std::invalid_argument("config: line " + std::to_string(line_no) + " has an empty key or value");
        }
        if (key == "preset") {
            preset = value;
        } else {
            pairs.emplace_back(key, value);
        }
    }
    RunConfig cfg = preset_config(preset);
    for (const auto& [key, value] : pairs) {
        apply_config_key(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

namespace {

json config_json(const RunConfig& cfg) {
    json j;
    j["task"] = task_name(cfg.task.kind);
    j["prompt_min"] = cfg.task.prompt_min;
    j["prompt_max"] = cfg.task.prompt_max;
    j["completion_len"] = cfg.task.completion_len;
    j["group_size"] = cfg.train.group_size;
    j["mu"] = cfg.train.mu;
    j["gamma"] = cfg.train.gamma;
    j["beta"] = cfg.train.beta;
    j["epsilon"] = cfg.train.epsilon;
    j["lr"] = cfg.train.lr;
    j["batch_prompts"] = cfg.train.batch_prompts;
    j["steps"] = cfg.train.steps;
    j["grad_accum"] = cfg.train.grad_accum;
    j["checkpoint_every"] = cfg.train.checkpoint_every;
    j["master_seed"] = cfg.train.master_seed;
    j["reverse"] = reverse_name(cfg.train.reverse_method);
    j["sampler"] = sampler_name(cfg.train.sampler.kind);
    j["block_len"] = cfg.train.sampler.block_len;
    j["tokens_per_step"] = cfg.train.sampler.tokens_per_step;
    j["sampler_steps"] = cfg.train.sampler.steps;
    j["temperature"] = cfg.train.sampler.temperature;
    j["schedule"] = schedule_name(cfg.train.sampler.schedule.kind);
    j["gumbel_noise"] = cfg.train.sampler.gumbel_noise ? 1 : 0;
    j["stop_reward"] = cfg.train.stop_reward;
    j["stop_window"] = cfg.train.stop_window;
    j["reward_correct_w"] = cfg.reward.correct_weight;
    j["reward_format_w"] = cfg.reward.format_weight;
    j["model_width"] = cfg.model.d_model;
    j["model_blocks"] = cfg.model.n_blocks;
    j["model_heads"] = cfg.model.n_heads;
    j["max_len"] = cfg.model.max_len;
    j["pretrain_steps"] = cfg.pretrain_steps;
    j["pretrain_batch"] = cfg.pretrain_batch;
    j["pretrain_lr"] = cfg.pretrain_lr;
    return j;
}

}  // namespace

std::string config_to_text(const RunConfig& cfg) {
    const json j = config_json(cfg);
    std::ostringstream out;
    for (const auto& [key, value] : j.items()) {
        out << key << " = " << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
    }
    return out.str();
}

std::string manifest_to_json(const RunManifest& manifest) {
    json j;
    j["config"] = config_json(manifest.config);
    j["master_seed"] = manifest.master_seed;
    j["code_version"] = manifest.code_version;
    j["started_at"] = manifest.started_at;
    j["out_dir"] = manifest.out_dir;
    return j.dump(2);
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write manifest: " + path);
    }
    out << manifest_to_json(manifest) << "\n";
}

}  // namespace mgrpo
