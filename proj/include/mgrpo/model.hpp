#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mgrpo/params.hpp"
#include "mgrpo/rng.hpp"
#include "mgrpo/schedule.hpp"
#include "mgrpo/tape.hpp"
#include "mgrpo/vocab.hpp"

namespace mgrpo {

struct ModelConfig {
    int vocab_size = 24;
    int d_model = 64;
    int n_heads = 4;
    int n_blocks = 2;
    int max_len = 64;
    int d_ff() const { return 4 * d_model; }
};

/// Model forwards exposed as plain logit evaluations (row-major L x V,
/// in double). Samplers and oracles consume this instead of the network
/// type so tests can substitute hand-built policies.
struct Policy {
    int vocab_size = 0;
    std::function<std::vector<double>(const std::vector<int32_t>& ids)> logits;
};

/// Bidirectional (non-causal) transformer denoiser: token + learned
/// positional embeddings, pre-norm attention/MLP blocks, vocabulary head.
/// Every position attends to every position.
template <typename T>
class Denoiser {
public:
    ModelConfig cfg;
    ParamSet<T> params;

    Denoiser() = default;

    static Denoiser random_init(const ModelConfig& cfg, uint64_t seed, double weight_std = 0.08) {
        Denoiser model;
        model.cfg = cfg;
        Rng rng(mix64(seed, 0x6d6f64656cull));
        auto gauss_tensor = [&](std::vector<int> shape, double std) {
            Tensor<T> t(std::move(shape));
            for (auto& v : t.data) {
                v = static_cast<T>(rng.gauss(0.0, std));
            }
            return t;
        };
        auto fill_tensor = [&](std::vector<int> shape, T value) {
            Tensor<T> t(std::move(shape));
            for (auto& v : t.data) {
                v = value;
            }
            return t;
        };
        auto& p = model.params;
        p.add("tok_embed", gauss_tensor({cfg.vocab_size, cfg.d_model}, 0.1));
        p.add("pos_embed", gauss_tensor({cfg.max_len, cfg.d_model}, 0.1));
        for (int b = 0; b < cfg.n_blocks; ++b) {
            const std::string pre = "blk" + std::to_string(b) + ".";
            p.add(pre + "ln1.g", fill_tensor({cfg.d_model}, T{1}));
            p.add(pre + "ln1.b", fill_tensor({cfg.d_model}, T{0}));
            p.add(pre + "attn.wq", gauss_tensor({cfg.d_model, cfg.d_model}, weight_std));
            p.add(pre + "attn.bq", fill_tensor({cfg.d_model}, T{0}));
            p.add(pre + "attn.wk", gauss_tensor({cfg.d_model, cfg.d_model}, weight_std));
            p.add(pre + "attn.bk", fill_tensor({cfg.d_model}, T{0}));
            p.add(pre + "attn.wv", gauss_tensor({cfg.d_model, cfg.d_model}, weight_std));
            p.add(pre + "attn.bv", fill_tensor({cfg.d_model}, T{0}));
            p.add(pre + "attn.wo", gauss_tensor({cfg.d_model, cfg.d_model}, weight_std));
            p.add(pre + "attn.bo", fill_tensor({cfg.d_model}, T{0}));
            p.add(pre + "ln2.g", fill_tensor({cfg.d_model}, T{1}));
            p.add(pre + "ln2.b", fill_tensor({cfg.d_model}, T{0}));
            p.add(pre + "mlp.w1", gauss_tensor({cfg.d_model, cfg.d_ff()}, weight_std));
            p.add(pre + "mlp.b1", fill_tensor({cfg.d_ff()}, T{0}));
            p.add(pre + "mlp.w2", gauss_tensor({cfg.d_ff(), cfg.d_model}, weight_std));
            p.add(pre + "mlp.b2", fill_tensor({cfg.d_model}, T{0}));
        }
        p.add("ln_f.g", fill_tensor({cfg.d_model}, T{1}));
        p.add("ln_f.b", fill_tensor({cfg.d_model}, T{0}));
        p.add("head.w", gauss_tensor({cfg.d_model, cfg.vocab_size}, weight_std));
        p.add("head.b", fill_tensor({cfg.vocab_size}, T{0}));
        return model;
    }

    /// Full-sequence logits (L, vocab) as a tape node.
    typename Tape<T>::Id forward(Tape<T>& tape, const ParamLeaves<T>& leaves, const std::vector<int32_t>& ids) const {
        if (static_cast<int>(ids.size()) > cfg.max_len) {
            throw std::invalid_argument("denoiser: sequence longer than max_len");
        }
        auto L = [&](const std::string& name) { return leaves.ids[params.index_of(name)]; };
        const int n_pos = static_cast<int>(ids.size());
        std::vector<int32_t> positions(ids.size());
        for (int i = 0; i < n_pos; ++i) {
            positions[static_cast<size_t>(i)] = i;
        }
        auto x = tape.add(tape.gather_rows(L("tok_embed"), ids), tape.gather_rows(L("pos_embed"), positions));
        const int hd = cfg.d_model / cfg.n_heads;
        const T inv_sqrt_hd = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));
        for (int b = 0; b < cfg.n_blocks; ++b) {
            const std::string pre = "blk" + std::to_string(b) + ".";
            auto h = tape.layer_norm(x, L(pre + "ln1.g"), L(pre + "ln1.b"), static_cast<T>(1e-5));
            auto q = tape.add_row_vector(tape.matmul(h, L(pre + "attn.wq")), L(pre + "attn.bq"));
            auto k = tape.add_row_vector(tape.matmul(h, L(pre + "attn.wk")), L(pre + "attn.bk"));
            auto v = tape.add_row_vector(tape.matmul(h, L(pre + "attn.wv")), L(pre + "attn.bv"));
            std::vector<typename Tape<T>::Id> heads;
            heads.reserve(static_cast<size_t>(cfg.n_heads));
            for (int hh = 0; hh < cfg.n_heads; ++hh) {
                const int c0 = hh * hd;
                const int c1 = c0 + hd;
                auto qh = tape.slice_cols(q, c0, c1);
                auto kh = tape.slice_cols(k, c0, c1);
                auto vh = tape.slice_cols(v, c0, c1);
                auto scores = tape.mul_const(tape.matmul_nt(qh, kh), inv_sqrt_hd);
                auto weights = tape.softmax_rows(scores);
                heads.push_back(tape.matmul(weights, vh));
            }
            auto att = tape.add_row_vector(tape.matmul(tape.concat_cols(heads), L(pre + "attn.wo")),
                                           L(pre + "attn.bo"));
            x = tape.add(x, att);
            auto h2 = tape.layer_norm(x, L(pre + "ln2.g"), L(pre + "ln2.b"), static_cast<T>(1e-5));
            auto m1 = tape.gelu(tape.add_row_vector(tape.matmul(h2, L(pre + "mlp.w1")), L(pre + "mlp.b1")));
            auto m2 = tape.add_row_vector(tape.matmul(m1, L(pre + "mlp.w2")), L(pre + "mlp.b2"));
            x = tape.add(x, m2);
        }
        auto xf = tape.layer_norm(x, L("ln_f.g"), L("ln_f.b"), static_cast<T>(1e-5));
        return tape.add_row_vector(tape.matmul(xf, L("head.w")), L("head.b"));
    }

    /// No-grad logits for sampling and evaluation.
    Tensor<T> logits(const std::vector<int32_t>& ids) const {
        Tape<T> tape(false);
        auto leaves = register_params(tape, params);
        return tape.value(forward(tape, leaves, ids));
    }

    Policy policy() const {
        Policy p;
        p.vocab_size = cfg.vocab_size;
        p.logits = [this](const std::vector<int32_t>& ids) {
            const Tensor<T> lg = logits(ids);
            std::vector<double> out(lg.data.size());
            for (size_t i = 0; i < out.size(); ++i) {
                out[i] = static_cast<double>(lg.data[i]);
            }
            return out;
        };
        return p;
    }

    template <typename U>
    Denoiser<U> cast() const {
        Denoiser<U> out;
        out.cfg = cfg;
        out.params = params.template cast<U>();
        return out;
    }

    Denoiser clone() const { return *this; }
};

/// Loss term on a reversed view: mean over masked positions of the
/// log-probability assigned to the clean token. Always <= 0; errors when
/// the view has no masked position.
template <typename T>
typename Tape<T>::Id ddm_loss_node(Tape<T>& tape, const Denoiser<T>& model, const ParamLeaves<T>& leaves,
                                   const MaskedView& view, const TokenSeq& x0) {
    if (view.masked_count() == 0) {
        throw std::invalid_argument("ddm_loss: view has no masked position");
    }
    if (view.ids.size() != x0.ids.size()) {
        throw std::invalid_argument("ddm_loss: view/clean length mismatch");
    }
    auto logits = model.forward(tape, leaves, view.ids);
    auto logp = tape.log_softmax_rows(logits);
    return tape.gather_mean(logp, x0.ids, view.mask);
}

/// No-grad loss value. Shares the recording code path so values are
/// bit-identical to the recorded forward.
template <typename T>
double ddm_loss(const Denoiser<T>& model, const MaskedView& view, const TokenSeq& x0) {
    Tape<T> tape(false);
    auto leaves = register_params(tape, model.params);
    return static_cast<double>(tape.value(ddm_loss_node(tape, model, leaves, view, x0)).scalar());
}

struct ModelMeta {
    ModelConfig cfg;
    Vocab vocab;
    ScheduleKind schedule = ScheduleKind::linear;
    int64_t step = 0;
};

/// Checkpoint plus structured-text sidecar (vocab layout, schedule kind,
/// dimensions). The sidecar lives at <path>.meta.json.
void save_model(const std::string& path, const Denoiser<float>& model, const ModelMeta& meta);
std::pair<Denoiser<float>, ModelMeta> load_model(const std::string& path);

}  // namespace mgrpo
