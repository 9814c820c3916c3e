#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mgrpo/tensor.hpp"

namespace mgrpo {

/// Reverse-mode tape over tensor operations. One tape per training step;
/// nodes reference earlier nodes only, so reverse creation order is a valid
/// topological order for the backward sweep.
///
/// A tape constructed with record=false computes identical forward values
/// but stores no backward closures; backward() is then an error. Policy
/// evaluations that only need loss values use that mode.
template <typename T>
class Tape {
public:
    using Id = int32_t;

    explicit Tape(bool record = true) : record_(record) {}

    bool recording() const { return record_; }
    size_t size() const { return nodes_.size(); }

    const Tensor<T>& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }

    const Tensor<T>& grad(Id id) const {
        if (grads_.empty()) {
            throw std::logic_error("tape: grad requested before backward()");
        }
        return grads_[static_cast<size_t>(id)];
    }

    Id leaf(Tensor<T> v) { return push(std::move(v), nullptr); }

    Id scalar(T v) { return leaf(Tensor<T>({1}, {v})); }

    /// Elementwise a + b, same shape.
    Id add(Id a, Id b) {
        const Tensor<T>& va = value(a);
        const Tensor<T>& vb = value(b);
        check_same_shape(va, vb, "add");
        Tensor<T> out = va;
        for (int64_t i = 0; i < out.size(); ++i) {
            out.data[i] += vb.data[i];
        }
        return push(std::move(out), [a, b](Tape& t, Id self) {
            t.axpy(a, T{1}, t.grads_[self]);
            t.axpy(b, T{1}, t.grads_[self]);
        });
    }

    Id sub(Id a, Id b) {
        const Tensor<T>& va = value(a);
        const Tensor<T>& vb = value(b);
        check_same_shape(va, vb, "sub");
        Tensor<T> out = va;
        for (int64_t i = 0; i < out.size(); ++i) {
            out.data[i] -= vb.data[i];
        }
        return push(std::move(out), [a, b](Tape& t, Id self) {
            t.axpy(a, T{1}, t.grads_[self]);
            t.axpy(b, T{-1}, t.grads_[self]);
        });
    }

    Id mul(Id a, Id b) {
        const Tensor<T>& va = value(a);
        const Tensor<T>& vb = value(b);
        check_same_shape(va, vb, "mul");
        Tensor<T> out = va;
        for (int64_t i = 0; i < out.size(); ++i) {
            out.data[i] *= vb.data[i];
        }
        return push(std::move(out), [a, b](Tape& t, Id self) {
            const Tensor<T>& g = t.grads_[self];
            Tensor<T>& ga = t.grads_[a];
            Tensor<T>& gb = t.grads_[b];
            const Tensor<T>& va = t.value(a);
            const Tensor<T>& vb = t.value(b);
            for (int64_t i = 0; i < g.size(); ++i) {
                ga.data[i] += g.data[i] * vb.data[i];
                gb.data[i] += g.data[i] * va.data[i];
            }
        });
    }

    Id add_const(Id a, T c) {
        Tensor<T> out = value(a);
        for (auto& v : out.data) {
            v += c;
        }
        return push(std::move(out), [a](Tape& t, Id self) { t.axpy(a, T{1}, t.grads_[self]); });
    }

    Id mul_const(Id a, T c) {
        Tensor<T> out = value(a);
        for (auto& v : out.data) {
            v *= c;
        }
        return push(std::move(out), [a, c](Tape& t, Id self) { t.axpy(a, c, t.grads_[self]); });
    }

    /// c - a (constant minuend).
    Id const_minus(T c, Id a) {
        Tensor<T> out = value(a);
        for (auto& v : out.data) {
            v = c - v;
        }
        return push(std::move(out), [a](Tape& t, Id self) { t.axpy(a, T{-1}, t.grads_[self]); });
    }

    /// (m,k) x (k,n) -> (m,n)
    Id matmul(Id a, Id b) {
        const Tensor<T>& va = value(a);
        const Tensor<T>& vb = value(b);
        check_rank2(va, "matmul lhs");
        check_rank2(vb, "matmul rhs");
        if (va.shape[1] != vb.shape[0]) {
            throw std::invalid_argument("matmul: inner dims " + shape_str(va.shape) + " x " + shape_str(vb.shape));
        }
        Tensor<T> out({va.shape[0], vb.shape[1]});
        gemm(va, vb, out);
        return push(std::move(out), [a, b](Tape& t, Id self) {
            const Tensor<T>& g = t.grads_[self];
            // dA += g * B^T ; dB += A^T * g
            gemm_nt(g, t.value(b), t.grads_[a]);
            gemm_tn(t.value(a), g, t.grads_[b]);
        });
    }

    /// (m,k) x (n,k)^T -> (m,n)
    Id matmul_nt(Id a, Id b) {
        const Tensor<T>& va = value(a);
        const Tensor<T>& vb = value(b);
        check_rank2(va, "matmul_nt lhs");
        check_rank2(vb, "matmul_nt rhs");
        if (va.shape[1] != vb.shape[1]) {
            throw std::invalid_argument("matmul_nt: inner dims");
        }
        Tensor<T> out({va.shape[0], vb.shape[0]});
        gemm_nt(va, vb, out);
        return push(std::move(out), [a, b](Tape& t, Id self) {
            const Tensor<T>& g = t.grads_[self];
            // C = A B^T: dA += g * B ; dB += g^T * A
            gemm(g, t.value(b), t.grads_[a]);
            gemm_tn(g, t.value(a), t.grads_[b]);
        });
    }

    /// Columns [c0, c1) of a rank-2 tensor.
    Id slice_cols(Id a, int c0, int c1) {
        const Tensor<T>& va = value(a);
        check_rank2(va, "slice_cols");
        const int m = va.shape[0];
        const int n = va.shape[1];
        if (c0 < 0 || c1 > n || c0 >= c1) {
            throw std::invalid_argument("slice_cols: bad range");
        }
        Tensor<T> out({m, c1 - c0});
        for (int i = 0; i < m; ++i) {
            for (int j = c0; j < c1; ++j) {
                out.at(i, j - c0) = va.at(i, j);
            }
        }
        return push(std::move(out), [a, c0, c1](Tape& t, Id self) {
            const Tensor<T>& g = t.grads_[self];
            Tensor<T>& ga = t.grads_[a];
            const int m = g.shape[0];
            for (int i = 0; i < m; ++i) {
                for (int j = c0; j < c1; ++j) {
                    ga.at(i, j) += g.at(i, j - c0);
                }
            }
        });
    }

    Id concat_cols(const std::vector<Id>& parts) {
        if (parts.empty()) {
            throw std::invalid_argument("concat_cols: empty");
        }
        const int m = value(parts[0]).shape[0];
        int n = 0;
        for (Id p : parts) {
            check_rank2(value(p), "concat_cols");
            if (value(p).shape[0] != m) {
                throw std::invalid_argument("concat_cols: row mismatch");
            }
            n += value(p).shape[1];
        }
        Tensor<T> out({m, n});
        int off = 0;
        for (Id p : parts) {
            const Tensor<T>& vp = value(p);
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < vp.shape[1]; ++j) {
                    out.at(i, off + j) = vp.at(i, j);
                }
            }
            off += vp.shape[1];
        }
        return push(std::move(out), [parts](Tape& t, Id self) {
            const Tensor<T>& g = t.grads_[self];
            const int m = g.shape[0];
            int off = 0;
            for (Id p : parts) {
                Tensor<T>& gp = t.grads_[p];
                const int w = gp.shape[1];
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < w; ++j) {
                        gp.at(i, j) += g.at(i, off + j);
                    }
                }
                off += w;
            }
        });
    }

    /// out[i,j] = a[i,j] + b[j]; b broadcast over rows.
    Id add_row_vector(Id a, Id b) {
        const Tensor<T>& va = value(a);
        const Tensor<T>& vb = value(b);
        check_rank2(va, "add_row_vector lhs");
        if (static_cast<int64_t>(va.shape[1]) != vb.size()) {
            throw std::invalid_argument("add_row_vector: width mismatch");
        }
        Tensor<T> out = va;
        const int m = va.shape[0];
        const int n = va.shape[1];
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                out.at(i, j) += vb.data[j];
            }
        }
        return push(std::move(out), [a, b](Tape& t, Id self) {
            const Tensor<T>& g = t.grads_[self];
            t.axpy(a, T{1}, g);
            Tensor<T>& gb = t.grads_[b];
            const int m = g.shape[0];
            const int n = g.shape[1];
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    gb.data[j] += g.at(i, j);
                }
            }
        });
    }

    /// Per-row layer normalization with learned gain and bias.
    Id layer_norm(Id x, Id gain, Id bias, T eps) {
        const Tensor<T>& vx = value(x);
        check_rank2(vx, "layer_norm");
        const int m = vx.shape[0];
        const int n = vx.shape[1];
        const Tensor<T>& vg = value(gain);
        const Tensor<T>& vb = value(bias);
        if (vg.size() != n || vb.size() != n) {
            throw std::invalid_argument("layer_norm: gain/bias width");
        }
        Tensor<T> out({m, n});
        Tensor<T> xhat({m, n});
        std::vector<T> inv_sigma(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) {
            T mean = 0;
            for (int j = 0; j < n; ++j) {
                mean += vx.at(i, j);
            }
            mean /= static_cast<T>(n);
            T var = 0;
            for (int j = 0; j < n; ++j) {
                const T d = vx.at(i, j) - mean;
                var += d * d;
            }
            var /= static_cast<T>(n);
            const T is = T{1} / std::sqrt(var + eps);
            inv_sigma[static_cast<size_t>(i)] = is;
            for (int j = 0; j < n; ++j) {
                const T xh = (vx.at(i, j) - mean) * is;
                xhat.at(i, j) = xh;
                out.at(i, j) = xh * vg.data[j] + vb.data[j];
            }
        }
        return push(std::move(out),
                    [x, gain, bias, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](Tape& t, Id self) {
                        const Tensor<T>& g = t.grads_[self];
                        const Tensor<T>& vg = t.value(gain);
                        Tensor<T>& gx = t.grads_[x];
                        Tensor<T>& gg = t.grads_[gain];
                        Tensor<T>& gb = t.grads_[bias];
                        const int m = g.shape[0];
                        const int n = g.shape[1];
                        for (int i = 0; i < m; ++i) {
                            T sum_gy = 0;
                            T sum_gyx = 0;
                            for (int j = 0; j < n; ++j) {
                                const T gy = g.at(i, j) * vg.data[j];
                                sum_gy += gy;
                                sum_gyx += gy * xhat.at(i, j);
                                gg.data[j] += g.at(i, j) * xhat.at(i, j);
                                gb.data[j] += g.at(i, j);
                            }
                            const T inv_n = T{1} / static_cast<T>(n);
                            for (int j = 0; j < n; ++j) {
                                const T gy = g.at(i, j) * vg.data[j];
                                gx.at(i, j) += (gy - inv_n * sum_gy - xhat.at(i, j) * inv_n * sum_gyx) *
                                               inv_sigma[static_cast<size_t>(i)];
                            }
                        }
                    });
    }

    Id gelu(Id a) {
        const Tensor<T>& va = value(a);
        Tensor<T> out = va;
        for (auto& v : out.data) {
            v = gelu_fwd(v);
        }
        return push(std::move(out), [a](Tape& t, Id self) {
            const Tensor<T>& g = t.grads_[self];
            Tensor<T>& ga = t.grads_[a];
            const Tensor<T>& va = t.value(a);
            for (int64_t i = 0; i < g.size(); ++i) {
                ga.data[i] += g.data[i] * gelu_bwd(va.data[i]);
            }
        });
    }

    Id softmax_rows(Id a) {
        const Tensor<T>& va = value(a);
        check_rank2(va, "softmax_rows");
        Tensor<T> out = va;
        const int m = va.shape[0];
        const int n = va.shape[1];
        for (int i = 0; i < m; ++i) {
            T mx = out.at(i, 0);
            for (int j = 1; j < n; ++j) {
                mx = std::max(mx, out.at(i, j));
            }
            T sum = 0;
            for (int j = 0; j < n; ++j) {
                const T e = std::exp(out.at(i, j) - mx);
                out.at(i, j) = e;
                sum += e;
            }
            const T inv = T{1} / sum;
            for (int j = 0; j < n; ++j) {
                out.at(i, j) *= inv;
            }
        }
        return push(std::move(out), [a](Tape& t, Id self) {
            const Tensor<T>& g = t.grads_[self];
            const Tensor<T>& s = t.value(self);
            Tensor<T>& ga = t.grads_[a];
            const int m = g.shape[0];
            const int n = g.shape[1];
            for (int i = 0; i < m; ++i) {
                T dot = 0;
                for (int j = 0; j < n; ++j) {
                    dot += g.at(i, j) * s.at(i, j);
                }
                for (int j = 0; j < n; ++j) {
                    ga.at(i, j) += s.at(i, j) * (g.at(i, j) - dot);
                }
            }
        });
    }

    /// Row-wise log-softmax; rejects non-finite input.
    Id log_softmax_rows(Id a) {
        const Tensor<T>& va = value(a);
        check_rank2(va, "log_softmax_rows");
        if (va.shape[1] < 1) {
            throw std::invalid_argument("log_softmax_rows: empty rows");
        }
        if (!va.all_finite()) {
            throw std::domain_error("log_softmax_rows: non-finite input");
        }
        Tensor<T> out = va;
        const int m = va.shape[0];
        const int n = va.shape[1];
        for (int i = 0; i < m; ++i) {
            T mx = out.at(i, 0);
            for (int j = 1; j < n; ++j) {
                mx = std::max(mx, out.at(i, j));
            }
            T sum = 0;
            for (int j = 0; j < n; ++j) {
                sum += std::exp(out.at(i, j) - mx);
            }
            const T lse = mx + std::log(sum);
            for (int j = 0; j < n; ++j) {
                out.at(i, j) -= lse;
            }
        }
        return push(std::move(out), [a](Tape& t, Id self) {
            const Tensor<T>& g = t.grads_[self];
            const Tensor<T>& y = t.value(self);
            Tensor<T>& ga = t.grads_[a];
            const int m = g.shape[0];
            const int n = g.shape[1];
            for (int i = 0; i < m; ++i) {
                T gsum = 0;
                for (int j = 0; j < n; ++j) {
                    gsum += g.at(i, j);
                }
                for (int j = 0; j < n; ++j) {
                    ga.at(i, j) += g.at(i, j) - std::exp(y.at(i, j)) * gsum;
                }
            }
        });
    }

    /// out[i,:] = table[ids[i],:]
    Id gather_rows(Id table, std::vector<int32_t> ids) {
        const Tensor<T>& vt = value(table);
        check_rank2(vt, "gather_rows");
        const int n = vt.shape[1];
        Tensor<T> out({static_cast<int>(ids.size()), n});
        for (size_t i = 0; i < ids.size(); ++i) {
            const int32_t r = ids[i];
            if (r < 0 || r >= vt.shape[0]) {
                throw std::out_of_range("gather_rows: id " + std::to_string(r));
            }
            for (int j = 0; j < n; ++j) {
                out.at(static_cast<int>(i), j) = vt.at(r, j);
            }
        }
        return push(std::move(out), [table, ids = std::move(ids)](Tape& t, Id self) {
            const Tensor<T>& g = t.grads_[self];
            Tensor<T>& gt = t.grads_[table];
            const int n = g.shape[1];
            for (size_t i = 0; i < ids.size(); ++i) {
                for (int j = 0; j < n; ++j) {
                    gt.at(ids[i], j) += g.at(static_cast<int>(i), j);
                }
            }
        });
    }

    /// Mean over selected rows i of logp[i, targets[i]]. Scalar output.
    Id gather_mean(Id logp, std::vector<int32_t> targets, std::vector<uint8_t> select) {
        const Tensor<T>& vl = value(logp);
        check_rank2(vl, "gather_mean");
        if (targets.size() != static_cast<size_t>(vl.shape[0]) || select.size() != targets.size()) {
            throw std::invalid_argument("gather_mean: length mismatch");
        }
        int n_sel = 0;
        T acc = 0;
        for (size_t i = 0; i < targets.size(); ++i) {
            if (select[i]) {
                acc += vl.at(static_cast<int>(i), targets[i]);
                ++n_sel;
            }
        }
        if (n_sel == 0) {
            throw std::invalid_argument("gather_mean: empty selection");
        }
        Tensor<T> out({1}, {acc / static_cast<T>(n_sel)});
        return push(std::move(out),
                    [logp, targets = std::move(targets), select = std::move(select), n_sel](Tape& t, Id self) {
                        const T g = t.grads_[self].data[0] / static_cast<T>(n_sel);
                        Tensor<T>& gl = t.grads_[logp];
                        for (size_t i = 0; i < targets.size(); ++i) {
                            if (select[i]) {
                                gl.at(static_cast<int>(i), targets[i]) += g;
                            }
                        }
                    });
    }

    Id sum_all(Id a) {
        const Tensor<T>& va = value(a);
        T acc = 0;
        for (T v : va.data) {
            acc += v;
        }
        Tensor<T> out({1}, {acc});
        return push(std::move(out), [a](Tape& t, Id self) {
            const T g = t.grads_[self].data[0];
            Tensor<T>& ga = t.grads_[a];
            for (auto& v : ga.data) {
                v += g;
            }
        });
    }

    Id add_list(const std::vector<Id>& xs) {
        if (xs.empty()) {
            throw std::invalid_argument("add_list: empty");
        }
        Tensor<T> out = value(xs[0]);
        for (size_t k = 1; k < xs.size(); ++k) {
            const Tensor<T>& v = value(xs[k]);
            check_same_shape(out, v, "add_list");
            for (int64_t i = 0; i < out.size(); ++i) {
                out.data[i] += v.data[i];
            }
        }
        return push(std::move(out), [xs](Tape& t, Id self) {
            for (Id x : xs) {
                t.axpy(x, T{1}, t.grads_[self]);
            }
        });
    }

    /// exp(clamp(x, lo, hi)) elementwise; gradient is zero in the clamped
    /// region. Out-of-range events are counted for training-health metrics.
    Id exp_clamped(Id a, T lo, T hi, int64_t* clamp_events = nullptr) {
        const Tensor<T>& va = value(a);
        Tensor<T> out = va;
        for (auto& v : out.data) {
            if (v < lo || v > hi) {
                if (clamp_events != nullptr) {
                    ++*clamp_events;
                }
                v = std::clamp(v, lo, hi);
            }
            v = std::exp(v);
        }
        return push(std::move(out), [a, lo, hi](Tape& t, Id self) {
            const Tensor<T>& g = t.grads_[self];
            const Tensor<T>& y = t.value(self);
            const Tensor<T>& va = t.value(a);
            Tensor<T>& ga = t.grads_[a];
            for (int64_t i = 0; i < g.size(); ++i) {
                if (va.data[i] > lo && va.data[i] < hi) {
                    ga.data[i] += g.data[i] * y.data[i];
                }
            }
        });
    }

    /// clamp(x, lo, hi); gradient passes inside [lo, hi], zero outside.
    Id clip_const(Id a, T lo, T hi) {
        const Tensor<T>& va = value(a);
        Tensor<T> out = va;
        for (auto& v : out.data) {
            v = std::clamp(v, lo, hi);
        }
        return push(std::move(out), [a, lo, hi](Tape& t, Id self) {
            const Tensor<T>& g = t.grads_[self];
            const Tensor<T>& va = t.value(a);
            Tensor<T>& ga = t.grads_[a];
            for (int64_t i = 0; i < g.size(); ++i) {
                if (va.data[i] >= lo && va.data[i] <= hi) {
                    ga.data[i] += g.data[i];
                }
            }
        });
    }

    /// Elementwise min; ties route the gradient to the first argument.
    Id min2(Id a, Id b) {
        const Tensor<T>& va = value(a);
        const Tensor<T>& vb = value(b);
        check_same_shape(va, vb, "min2");
        Tensor<T> out = va;
        for (int64_t i = 0; i < out.size(); ++i) {
            out.data[i] = std::min(va.data[i], vb.data[i]);
        }
        return push(std::move(out), [a, b](Tape& t, Id self) {
            const Tensor<T>& g = t.grads_[self];
            const Tensor<T>& va = t.value(a);
            const Tensor<T>& vb = t.value(b);
            Tensor<T>& ga = t.grads_[a];
            Tensor<T>& gb = t.grads_[b];
            for (int64_t i = 0; i < g.size(); ++i) {
                if (va.data[i] <= vb.data[i]) {
                    ga.data[i] += g.data[i];
                } else {
                    gb.data[i] += g.data[i];
                }
            }
        });
    }

    /// Seeds d(root)/d(root) = 1 and sweeps the tape in reverse order.
    void backward(Id root) {
        if (!record_) {
            throw std::logic_error("tape: backward() on a non-recording tape");
        }
        if (!value(root).is_scalar()) {
            throw std::invalid_argument("tape: backward root must be scalar");
        }
        grads_.clear();
        grads_.resize(nodes_.size());
        for (size_t i = 0; i < nodes_.size(); ++i) {
            grads_[i] = Tensor<T>(nodes_[i].value.shape);
        }
        grads_[static_cast<size_t>(root)].data[0] = T{1};
        for (size_t i = nodes_.size(); i-- > 0;) {
            if (nodes_[i].pull) {
                nodes_[i].pull(*this, static_cast<Id>(i));
            }
        }
    }

private:
    struct Node {
        Tensor<T> value;
        std::function<void(Tape&, Id)> pull;
    };

    std::vector<Node> nodes_;
    std::vector<Tensor<T>> grads_;
    bool record_;

    template <typename F>
    Id push(Tensor<T> v, F&& pull) {
        Node n;
        n.value = std::move(v);
        if constexpr (!std::is_same_v<std::decay_t<F>, std::nullptr_t>) {
            if (record_) {
                n.pull = std::forward<F>(pull);
            }
        }
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }

    void axpy(Id dst, T alpha, const Tensor<T>& g) {
        Tensor<T>& gd = grads_[static_cast<size_t>(dst)];
        for (int64_t i = 0; i < g.size(); ++i) {
            gd.data[i] += alpha * g.data[i];
        }
    }

    static void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
        if (!a.same_shape(b)) {
            throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                                        shape_str(b.shape));
        }
    }

    static void check_rank2(const Tensor<T>& a, const char* op) {
        if (a.shape.size() != 2) {
            throw std::invalid_argument(std::string(op) + ": expected rank-2, got " + shape_str(a.shape));
        }
    }

    static T gelu_fwd(T x) {
        constexpr double c = 0.7978845608028653923;  // sqrt(2/pi)
        const double xd = static_cast<double>(x);
        const double u = c * (xd + 0.044715 * xd * xd * xd);
        return static_cast<T>(0.5 * xd * (1.0 + std::tanh(u)));
    }

    static T gelu_bwd(T x) {
        constexpr double c = 0.7978845608028653923;
        const double xd = static_cast<double>(x);
        const double u = c * (xd + 0.044715 * xd * xd * xd);
        const double th = std::tanh(u);
        const double sech2 = 1.0 - th * th;
        return static_cast<T>(0.5 * (1.0 + th) + 0.5 * xd * sech2 * c * (1.0 + 3.0 * 0.044715 * xd * xd));
    }

    // out += A * B (accumulating), out preallocated.
    static void gemm(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out) {
        const int m = a.shape[0];
        const int k = a.shape[1];
        const int n = b.shape[1];
        for (int i = 0; i < m; ++i) {
            T* orow = &out.data[static_cast<size_t>(i) * n];
            const T* arow = &a.data[static_cast<size_t>(i) * k];
            for (int p = 0; p < k; ++p) {
                const T av = arow[p];
                const T* brow = &b.data[static_cast<size_t>(p) * n];
                for (int j = 0; j < n; ++j) {
                    orow[j] += av * brow[j];
                }
            }
        }
    }

    // out += A * B^T
    static void gemm_nt(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out) {
        const int m = a.shape[0];
        const int k = a.shape[1];
        const int n = b.shape[0];
        for (int i = 0; i < m; ++i) {
            const T* arow = &a.data[static_cast<size_t>(i) * k];
            T* orow = &out.data[static_cast<size_t>(i) * n];
            for (int j = 0; j < n; ++j) {
                const T* brow = &b.data[static_cast<size_t>(j) * k];
                T acc = 0;
                for (int p = 0; p < k; ++p) {
                    acc += arow[p] * brow[p];
                }
                orow[j] += acc;
            }
        }
    }

    // out += A^T * B  (A is m x k used transposed: k x m result rows)
    static void gemm_tn(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out) {
        const int m = a.shape[0];
        const int k = a.shape[1];
        const int n = b.shape[1];
        for (int p = 0; p < m; ++p) {
            const T* arow = &a.data[static_cast<size_t>(p) * k];
            const T* brow = &b.data[static_cast<size_t>(p) * n];
            for (int i = 0; i < k; ++i) {
                const T av = arow[i];
                T* orow = &out.data[static_cast<size_t>(i) * n];
                for (int j = 0; j < n; ++j) {
                    orow[j] += av * brow[j];
                }
            }
        }
    }
};

}  // namespace mgrpo
