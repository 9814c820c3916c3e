#include "mgrpo/metrics.hpp"

#include <stdexcept>

#include <json.hpp>

namespace mgrpo {

MetricsWriter::MetricsWriter(const std::string& path) : path_(path), out_(path, std::ios::app) {
    if (!out_) {
        throw std::runtime_error("cannot open metrics stream: " + path);
    }
}

std::string MetricsWriter::to_json(const StepMetrics& m) {
    nlohmann::json j;
    j["step"] = m.step;
    j["mean_reward"] = m.mean_reward;
    j["std_reward"] = m.std_reward;
    j["mean_rho"] = m.mean_rho;
    j["max_rho"] = m.max_rho;
    j["clip_frac"] = m.clip_frac;
    j["mean_kl"] = m.mean_kl;
    j["clamp_count"] = m.clamp_count;
    j["reward_incidents"] = m.reward_incidents;
    j["grad_norm"] = m.grad_norm;
    j["wall_ms"] = m.wall_ms;
    return j.dump();
}

void MetricsWriter::write(const StepMetrics& m) {
    out_ << to_json(m) << "\n";
    out_.flush();
    if (!out_) {
        throw std::runtime_error("metrics write failed: " + path_);
    }
}

}  // namespace mgrpo
