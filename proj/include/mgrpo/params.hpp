#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mgrpo/tape.hpp"
#include "mgrpo/tensor.hpp"

namespace mgrpo {

/// Ordered, named parameter collection. Names are unique and shapes are
/// fixed after creation; iteration order is insertion order, which also
/// fixes checkpoint layout and gradient reduction order.
template <typename T>
class ParamSet {
public:
    struct Entry {
        std::string name;
        Tensor<T> tensor;
    };

    Tensor<T>& add(const std::string& name, Tensor<T> t) {
        if (index_.count(name) != 0) {
            throw std::invalid_argument("param already exists: " + name);
        }
        index_[name] = entries_.size();
        entries_.push_back(Entry{name, std::move(t)});
        return entries_.back().tensor;
    }

    Tensor<T>& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) {
            throw std::out_of_range("no such param: " + name);
        }
        return entries_[it->second].tensor;
    }

    const Tensor<T>& get(const std::string& name) const {
        return const_cast<ParamSet*>(this)->get(name);
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) {
            throw std::out_of_range("no such param: " + name);
        }
        return it->second;
    }

    size_t count() const { return entries_.size(); }
    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }

    int64_t step = 0;  // optimizer step counter

    template <typename U>
    ParamSet<U> cast() const {
        ParamSet<U> out;
        for (const auto& e : entries_) {
            out.add(e.name, e.tensor.template cast<U>());
        }
        out.step = step;
        return out;
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, size_t> index_;
};

/// Gradients aligned with ParamSet entry order.
template <typename T>
using GradVec = std::vector<Tensor<T>>;

/// Tape leaf ids for every parameter, in entry order.
template <typename T>
struct ParamLeaves {
    std::vector<typename Tape<T>::Id> ids;
};

template <typename T>
ParamLeaves<T> register_params(Tape<T>& tape, const ParamSet<T>& params) {
    ParamLeaves<T> leaves;
    leaves.ids.reserve(params.count());
    for (const auto& e : params.entries()) {
        leaves.ids.push_back(tape.leaf(e.tensor));
    }
    return leaves;
}

/// Gradient of a recorded scalar loss with respect to every parameter.
template <typename T>
GradVec<T> backward(Tape<T>& tape, typename Tape<T>::Id loss, const ParamLeaves<T>& leaves) {
    tape.backward(loss);
    GradVec<T> grads;
    grads.reserve(leaves.ids.size());
    for (auto id : leaves.ids) {
        grads.push_back(tape.grad(id));
    }
    return grads;
}

template <typename T>
void accumulate_grads(GradVec<T>& acc, const GradVec<T>& g) {
    if (acc.empty()) {
        acc = g;
        return;
    }
    for (size_t i = 0; i < acc.size(); ++i) {
        for (int64_t k = 0; k < acc[i].size(); ++k) {
            acc[i].data[k] += g[i].data[k];
        }
    }
}

template <typename T>
double grad_l2_norm(const GradVec<T>& grads) {
    double acc = 0.0;
    for (const auto& g : grads) {
        for (T v : g.data) {
            acc += static_cast<double>(v) * static_cast<double>(v);
        }
    }
    return std::sqrt(acc);
}

/// Adaptive-moment optimizer. Moments live here; the step counter lives in
/// the ParamSet so snapshots carry it.
template <typename T>
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

    void step(ParamSet<T>& params, const GradVec<T>& grads) {
        if (grads.size() != params.count()) {
            throw std::invalid_argument("adam: gradient count mismatch");
        }
        if (m_.empty()) {
            for (const auto& e : params.entries()) {
                m_.emplace_back(e.tensor.shape);
                v_.emplace_back(e.tensor.shape);
            }
        }
        params.step += 1;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(params.step));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(params.step));
        for (size_t p = 0; p < params.count(); ++p) {
            auto& entry = params.entries()[p];
            const Tensor<T>& g = grads[p];
            if (!g.same_shape(entry.tensor)) {
                throw std::invalid_argument("adam: gradient shape mismatch for " + entry.name);
            }
            for (int64_t i = 0; i < g.size(); ++i) {
                const double gv = static_cast<double>(g.data[i]);
                if (std::isnan(gv)) {
                    throw std::domain_error("adam: NaN gradient in " + entry.name);
                }
                double m = beta1_ * static_cast<double>(m_[p].data[i]) + (1.0 - beta1_) * gv;
                double v = beta2_ * static_cast<double>(v_[p].data[i]) + (1.0 - beta2_) * gv * gv;
                m_[p].data[i] = static_cast<T>(m);
                v_[p].data[i] = static_cast<T>(v);
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                entry.tensor.data[i] =
                    static_cast<T>(static_cast<double>(entry.tensor.data[i]) - lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

private:
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    std::vector<Tensor<T>> m_;
    std::vector<Tensor<T>> v_;
};

}  // namespace mgrpo
