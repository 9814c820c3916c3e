#include <doctest.h>

#include <cmath>

#include "mgrpo/oracle.hpp"
#include "mgrpo/params.hpp"
#include "mgrpo/rng.hpp"
#include "mgrpo/tape.hpp"

using namespace mgrpo;

namespace {

Tensor<double> random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data) {
        v = rng.gauss(0.0, scale);
    }
    return t;
}

// Finite-difference check of one op: objective = fixed random weighting of
// the op output, differentiated with respect to every input tensor.
template <typename BuildFn>
double op_grad_error(const std::vector<Tensor<double>>& inputs, BuildFn&& build, uint64_t seed) {
    ParamSet<double> params;
    for (size_t i = 0; i < inputs.size(); ++i) {
        params.add("in" + std::to_string(i), inputs[i]);
    }
    auto objective = [&](const ParamSet<double>& p) {
        Tape<double> tape(false);
        auto leaves = register_params(tape, p);
        auto out = build(tape, leaves.ids);
        const Tensor<double>& v = tape.value(out);
        Rng wrng(seed);
        double acc = 0.0;
        for (double x : v.data) {
            acc += x * wrng.gauss(0.0, 1.0);
        }
        return acc;
    };
    Tape<double> tape(true);
    auto leaves = register_params(tape, params);
    auto out = build(tape, leaves.ids);
    // Same weighting as the objective, expressed on the tape.
    const Tensor<double>& v = tape.value(out);
    Rng wrng(seed);
    Tensor<double> w(v.shape);
    for (auto& x : w.data) {
        x = wrng.gauss(0.0, 1.0);
    }
    auto weighted = tape.sum_all(tape.mul(out, tape.leaf(w)));
    const auto grads = backward(tape, weighted, leaves);
    const auto fd = finite_diff_grad(objective, params, 1e-3);
    return max_relative_error(grads, fd);
}

}  // namespace

TEST_CASE("log_softmax matches direct evaluation and normalizes") {
    Tape<double> tape(true);
    auto x = tape.leaf(Tensor<double>({1, 3}, {1.0, 2.0, 3.0}));
    auto y = tape.log_softmax_rows(x);
    const auto& v = tape.value(y);
    // 64-bit reference: x_i - log(sum exp(x_j))
    const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
    CHECK(v.data[0] == doctest::Approx(1.0 - lse).epsilon(1e-12));
    CHECK(v.data[1] == doctest::Approx(2.0 - lse).epsilon(1e-12));
    CHECK(v.data[2] == doctest::Approx(3.0 - lse).epsilon(1e-12));
    double mass = 0.0;
    for (double d : v.data) {
        mass += std::exp(d);
    }
    CHECK(std::abs(mass - 1.0) < 1e-6);
}

TEST_CASE("log_softmax symmetric and single-logit cases") {
    Tape<double> tape(false);
    auto two = tape.log_softmax_rows(tape.leaf(Tensor<double>({1, 2}, {0.0, 0.0})));
    CHECK(tape.value(two).data[0] == doctest::Approx(-std::log(2.0)));
    CHECK(tape.value(two).data[1] == doctest::Approx(-std::log(2.0)));
    auto one = tape.log_softmax_rows(tape.leaf(Tensor<double>({1, 1}, {7.25})));
    CHECK(tape.value(one).data[0] == 0.0);
}

TEST_CASE("log_softmax rejects non-finite input") {
    Tape<double> tape(false);
    auto x = tape.leaf(Tensor<double>({1, 2}, {std::nan(""), 0.0}));
    CHECK_THROWS(tape.log_softmax_rows(x));
}

TEST_CASE("backward trivial identities") {
    ParamSet<float> params;
    params.add("p", Tensor<float>({2, 3}, {1, -2, 3, 4, -5, 6}));
    {
        Tape<float> tape(true);
        auto leaves = register_params(tape, params);
        auto loss = tape.sum_all(leaves.ids[0]);
        auto grads = backward(tape, loss, leaves);
        for (float g : grads[0].data) {
            CHECK(g == 1.0f);
        }
    }
    {
        Tape<float> tape(true);
        auto leaves = register_params(tape, params);
        auto loss = tape.mul_const(tape.sum_all(tape.mul(leaves.ids[0], leaves.ids[0])), 0.5f);
        auto grads = backward(tape, loss, leaves);
        for (size_t i = 0; i < grads[0].data.size(); ++i) {
            CHECK(grads[0].data[i] == doctest::Approx(params.get("p").data[i]));
        }
    }
}

TEST_CASE("backward requires a scalar root") {
    Tape<float> tape(true);
    auto x = tape.leaf(Tensor<float>({2, 2}, {1, 2, 3, 4}));
    CHECK_THROWS(tape.backward(x));
}

TEST_CASE("every differentiable op matches central finite differences") {
    Rng rng(12345);
    const double tol = 1e-3;

    SUBCASE("add/sub/mul/const ops") {
        auto a = random_tensor({3, 4}, rng);
        auto b = random_tensor({3, 4}, rng);
        const double err = op_grad_error({a, b},
                                         [](Tape<double>& t, const std::vector<Tape<double>::Id>& in) {
                                             auto s = t.add(in[0], in[1]);
                                             auto d = t.sub(s, t.mul(in[0], in[1]));
                                             return t.add_const(t.mul_const(d, 1.7), -0.3);
                                         },
                                         1);
        CHECK(err < tol);
    }
    SUBCASE("matmul") {
        auto a = random_tensor({3, 5}, rng);
        auto b = random_tensor({5, 4}, rng);
        const double err = op_grad_error(
            {a, b},
            [](Tape<double>& t, const std::vector<Tape<double>::Id>& in) { return t.matmul(in[0], in[1]); }, 2);
        CHECK(err < tol);
    }
    SUBCASE("matmul_nt") {
        auto a = random_tensor({3, 5}, rng);
        auto b = random_tensor({4, 5}, rng);
        const double err = op_grad_error(
            {a, b},
            [](Tape<double>& t, const std::vector<Tape<double>::Id>& in) { return t.matmul_nt(in[0], in[1]); }, 3);
        CHECK(err < tol);
    }
    SUBCASE("slice and concat") {
        auto a = random_tensor({3, 6}, rng);
        const double err = op_grad_error({a},
                                         [](Tape<double>& t, const std::vector<Tape<double>::Id>& in) {
                                             auto left = t.slice_cols(in[0], 0, 2);
                                             auto right = t.slice_cols(in[0], 2, 6);
                                             return t.concat_cols({right, left});
                                         },
                                         4);
        CHECK(err < tol);
    }
    SUBCASE("add_row_vector") {
        auto a = random_tensor({4, 3}, rng);
        auto b = random_tensor({3}, rng);
        const double err = op_grad_error(
            {a, b},
            [](Tape<double>& t, const std::vector<Tape<double>::Id>& in) { return t.add_row_vector(in[0], in[1]); },
            5);
        CHECK(err < tol);
    }
    SUBCASE("layer_norm") {
        auto x = random_tensor({4, 6}, rng);
        auto g = random_tensor({6}, rng, 0.5);
        auto b = random_tensor({6}, rng, 0.5);
        const double err = op_grad_error({x, g, b},
                                         [](Tape<double>& t, const std::vector<Tape<double>::Id>& in) {
                                             return t.layer_norm(in[0], in[1], in[2], 1e-5);
                                         },
                                         6);
        CHECK(err < tol);
    }
    SUBCASE("gelu") {
        auto x = random_tensor({3, 5}, rng);
        const double err = op_grad_error(
            {x}, [](Tape<double>& t, const std::vector<Tape<double>::Id>& in) { return t.gelu(in[0]); }, 7);
        CHECK(err < tol);
    }
    SUBCASE("softmax_rows") {
        auto x = random_tensor({3, 5}, rng);
        const double err = op_grad_error(
            {x}, [](Tape<double>& t, const std::vector<Tape<double>::Id>& in) { return t.softmax_rows(in[0]); },
            8);
        CHECK(err < tol);
    }
    SUBCASE("log_softmax_rows") {
        auto x = random_tensor({3, 5}, rng);
        const double err = op_grad_error(
            {x},
            [](Tape<double>& t, const std::vector<Tape<double>::Id>& in) { return t.log_softmax_rows(in[0]); }, 9);
        CHECK(err < tol);
    }
    SUBCASE("gather_rows and gather_mean") {
        auto table = random_tensor({5, 4}, rng);
        const double err = op_grad_error({table},
                                         [](Tape<double>& t, const std::vector<Tape<double>::Id>& in) {
                                             return t.gather_rows(in[0], {4, 0, 0, 2});
                                         },
                                         10);
        CHECK(err < tol);
        auto logits = random_tensor({4, 5}, rng);
        const double err2 = op_grad_error({logits},
                                          [](Tape<double>& t, const std::vector<Tape<double>::Id>& in) {
                                              auto lp = t.log_softmax_rows(in[0]);
                                              return t.gather_mean(lp, {1, 2, 0, 4}, {1, 0, 1, 1});
                                          },
                                          11);
        CHECK(err2 < tol);
    }
    SUBCASE("exp_clamped, clip_const, min2") {
        auto a = random_tensor({1}, rng, 0.5);
        auto b = random_tensor({1}, rng, 0.5);
        const double err = op_grad_error({a, b},
                                         [](Tape<double>& t, const std::vector<Tape<double>::Id>& in) {
                                             auto rho = t.exp_clamped(t.sub(in[0], in[1]), -20.0, 20.0);
                                             auto clipped = t.clip_const(rho, 0.8, 1.2);
                                             return t.min2(t.mul_const(rho, 1.5), t.mul_const(clipped, 1.5));
                                         },
                                         12);
        CHECK(err < tol);
    }
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
    ParamSet<float> params;
    params.add("w", Tensor<float>({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f}));
    const auto before = params.get("w").data;
    Adam<float> opt(0.01);
    GradVec<float> grads;
    grads.emplace_back(std::vector<int>{2, 2});
    opt.step(params, grads);
    CHECK(params.get("w").data == before);
    CHECK(params.step == 1);
}

TEST_CASE("adam constant gradient moves each weight by about lr") {
    ParamSet<float> params;
    params.add("w", Tensor<float>({3}, {0.5f, -0.25f, 1.0f}));
    const auto before = params.get("w").data;
    Adam<float> opt(0.01);
    GradVec<float> grads;
    grads.push_back(Tensor<float>({3}, {0.3f, 0.3f, -0.7f}));
    opt.step(params, grads);
    for (size_t i = 0; i < 3; ++i) {
        const double update = static_cast<double>(before[i]) - static_cast<double>(params.get("w").data[i]);
        const double direction = grads[0].data[i] > 0 ? 1.0 : -1.0;
        CHECK(update * direction == doctest::Approx(0.01).epsilon(1e-3));
    }
}

TEST_CASE("adam rejects NaN gradients naming the parameter") {
    ParamSet<float> params;
    params.add("w", Tensor<float>({1}, {0.0f}));
    Adam<float> opt(0.01);
    GradVec<float> grads;
    grads.push_back(Tensor<float>({1}, {std::nanf("")}));
    try {
        opt.step(params, grads);
        FAIL("expected NaN gradient to throw");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("w") != std::string::npos);
    }
}

TEST_CASE("adam runs are bit-identical under the same inputs") {
    auto run = [] {
        ParamSet<float> params;
        params.add("w", Tensor<float>({4}, {0.1f, -0.2f, 0.3f, -0.4f}));
        Adam<float> opt(0.005);
        Rng rng(777);
        for (int step = 0; step < 50; ++step) {
            GradVec<float> grads;
            Tensor<float> g({4});
            for (auto& v : g.data) {
                v = static_cast<float>(rng.gauss(0.0, 1.0));
            }
            grads.push_back(std::move(g));
            opt.step(params, grads);
        }
        return params.get("w").data;
    };
    CHECK(run() == run());
}
