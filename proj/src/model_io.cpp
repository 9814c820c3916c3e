#include <fstream>

#include <json.hpp>

#include "mgrpo/checkpoint.hpp"
#include "mgrpo/model.hpp"

namespace mgrpo {

using nlohmann::json;

void save_model(const std::string& path, const Denoiser<float>& model, const ModelMeta& meta) {
    save_checkpoint(path, model.params);
    json j;
    j["model"] = {{"vocab_size", meta.cfg.vocab_size}, {"d_model", meta.cfg.d_model},
                  {"n_heads", meta.cfg.n_heads},       {"n_blocks", meta.cfg.n_blocks},
                  {"max_len", meta.cfg.max_len}};
    j["vocab"] = {{"size", meta.vocab.size},         {"mask_id", meta.vocab.mask_id},
                  {"pad_id", meta.vocab.pad_id},     {"ans_open", meta.vocab.ans_open},
                  {"ans_close", meta.vocab.ans_close}, {"plus_id", meta.vocab.plus_id},
                  {"eq_id", meta.vocab.eq_id},       {"letter0", meta.vocab.letter0}};
    j["schedule"] = schedule_name(meta.schedule);
    j["step"] = meta.step;
    std::ofstream out(path + ".meta.json");
    if (!out) {
        throw std::runtime_error("cannot write model sidecar: " + path + ".meta.json");
    }
    out << j.dump(2) << "\n";
}

std::pair<Denoiser<float>, ModelMeta> load_model(const std::string& path) {
    std::ifstream in(path + ".meta.json");
    if (!in) {
        throw std::runtime_error("cannot open model sidecar: " + path + ".meta.json");
    }
    json j = json::parse(in);
    ModelMeta meta;
    meta.cfg.vocab_size = j.at("model").at("vocab_size").get<int>();
    meta.cfg.d_model = j.at("model").at("d_model").get<int>();
    meta.cfg.n_heads = j.at("model").at("n_heads").get<int>();
    meta.cfg.n_blocks = j.at("model").at("n_blocks").get<int>();
    meta.cfg.max_len = j.at("model").at("max_len").get<int>();
    meta.vocab.size = j.at("vocab").at("size").get<int>();
    meta.vocab.mask_id = j.at("vocab").at("mask_id").get<int32_t>();
    meta.vocab.pad_id = j.at("vocab").at("pad_id").get<int32_t>();
    meta.vocab.ans_open = j.at("vocab").at("ans_open").get<int32_t>();
    meta.vocab.ans_close = j.at("vocab").at("ans_close").get<int32_t>();
    meta.vocab.plus_id = j.at("vocab").at("plus_id").get<int32_t>();
    meta.vocab.eq_id = j.at("vocab").at("eq_id").get<int32_t>();
    meta.vocab.letter0 = j.at("vocab").at("letter0").get<int32_t>();
    meta.vocab.validate();
    meta.schedule = schedule_from_name(j.at("schedule").get<std::string>());
    meta.step = j.value("step", int64_t{0});

    Denoiser<float> model;
    model.cfg = meta.cfg;
    model.params = load_checkpoint(path);
    model.params.step = meta.step;
    return {std::move(model), meta};
}

}  // namespace mgrpo
