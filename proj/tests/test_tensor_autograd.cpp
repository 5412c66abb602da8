#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "adaloc/autograd.hpp"
#include "adaloc/network.hpp"
#include "adaloc/rng.hpp"

using namespace adaloc;

TEST_CASE("tensor shape/data agreement") {
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0}), DimensionError);
    Tensor t({2, 2}, {1, 2, 3, 4});
    CHECK(t.at(1, 0) == 3.0);
}

TEST_CASE("affine examples") {
    Tape tape;
    {
        const int w = tape.leaf(Tensor({2, 2}, {1, 0, 0, 1}));
        const int b = tape.leaf(Tensor({2}, {0, 0}));
        const int x = tape.leaf(Tensor({2}, {3, 5}));
        const int y = tape.affine(w, b, x);
        CHECK(tape.value(y).data == std::vector<double>{3, 5});
    }
    tape.reset();
    {
        const int w = tape.leaf(Tensor({1, 2}, {2, 1}));
        const int b = tape.leaf(Tensor({1}, {1}));
        const int x = tape.leaf(Tensor({2}, {1, 1}));
        CHECK(tape.value(tape.affine(w, b, x)).data == std::vector<double>{4});
    }
    tape.reset();
    {
        const int w = tape.leaf(Tensor({1, 2}, {0, 0}));
        const int b = tape.leaf(Tensor({1}, {7}));
        const int x = tape.leaf(Tensor({2}, {9, 9}));
        CHECK(tape.value(tape.affine(w, b, x)).data == std::vector<double>{7});
    }
    tape.reset();
    {
        const int w = tape.leaf(Tensor({1, 2}, {2, 1}));
        const int b = tape.leaf(Tensor({1}, {1}));
        const int x = tape.leaf(Tensor({3}, {1, 1, 1}));
        CHECK_THROWS_AS(tape.affine(w, b, x), DimensionError);
    }
}

TEST_CASE("relu examples") {
    Tape tape;
    const int x = tape.leaf(Tensor({3}, {-1, 0, 2}));
    CHECK(tape.value(tape.relu(x)).data == std::vector<double>{0, 0, 2});
    const int z = tape.leaf(Tensor({1}, {0}));
    CHECK(tape.value(tape.relu(z)).data == std::vector<double>{0});
    const int v = tape.leaf(Tensor({2}, {5, -5}));
    CHECK(tape.value(tape.relu(v)).data == std::vector<double>{5, 0});
}

TEST_CASE("relu is 1-Lipschitz and nonnegative") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double a = rng.uniform(-10, 10), b = rng.uniform(-10, 10);
        const double ra = std::max(0.0, a), rb = std::max(0.0, b);
        CHECK(ra >= 0.0);
        CHECK(std::fabs(ra - rb) <= std::fabs(a - b));
    }
}

TEST_CASE("conv2d examples") {
    Tape tape;
    {
        const int k = tape.leaf(Tensor({1, 1, 1, 1}, {2}));
        const int x = tape.leaf(Tensor({1, 1, 1}, {3}));
        CHECK(tape.value(tape.conv2d(k, x)).data == std::vector<double>{6});
    }
    tape.reset();
    {
        const int k = tape.leaf(Tensor({2, 1, 2, 2}, std::vector<double>(8, 0.0)));
        const int x = tape.leaf(Tensor({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
        const Tensor& y = tape.value(tape.conv2d(k, x));
        for (double v : y.data) CHECK(v == 0.0);
    }
    tape.reset();
    {
        const int k = tape.leaf(Tensor({1, 1, 2, 2}, {1, 1, 1, 1}));
        const int x = tape.leaf(Tensor({1, 2, 2}, {1, 2, 3, 4}));
        CHECK(tape.value(tape.conv2d(k, x)).data == std::vector<double>{10});
    }
    tape.reset();
    {
        const int k = tape.leaf(Tensor({1, 1, 3, 3}, std::vector<double>(9, 1.0)));
        const int x = tape.leaf(Tensor({1, 2, 2}, {1, 2, 3, 4}));
        CHECK_THROWS_AS(tape.conv2d(k, x), DimensionError);
    }
}

TEST_CASE("softmax cross entropy examples") {
    Tape tape;
    {
        const int z = tape.leaf(Tensor({2}, {0, 0}));
        CHECK(tape.value(tape.softmax_cross_entropy(z, 0)).data[0] ==
              doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    {
        const int z = tape.leaf(Tensor({2}, {10, -10}));
        // -log(e^10 / (e^10 + e^-10)) = log(1 + e^-20)
        CHECK(tape.value(tape.softmax_cross_entropy(z, 0)).data[0] ==
              doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-9));
    }
    {
        const int z = tape.leaf(Tensor({4}, {0, 0, 0, 0}));
        CHECK(tape.value(tape.softmax_cross_entropy(z, 2)).data[0] ==
              doctest::Approx(std::log(4.0)).epsilon(1e-12));
    }
    {
        const int z = tape.leaf(Tensor({2}, {0, 0}));
        CHECK_THROWS_AS(tape.softmax_cross_entropy(z, 2), IndexError);
    }
}

TEST_CASE("gradients: scalar cases") {
    Tape tape;
    {
        // loss = w * x at x = 3
        const int w = tape.leaf(Tensor({1, 1}, {5}));
        const int b = tape.leaf(Tensor({1}, {0}));
        const int x = tape.leaf(Tensor({1}, {3}));
        const int y = tape.affine(w, b, x);
        tape.backward(y);
        CHECK(tape.gradient(w).data[0] == 3.0);
    }
    tape.reset();
    {
        // loss = relu(w) at w = -1: inactive
        const int w = tape.leaf(Tensor({1}, {-1}));
        const int y = tape.relu(w);
        tape.backward(y);
        CHECK(tape.gradient(w).data[0] == 0.0);
    }
    tape.reset();
    {
        const int w = tape.leaf(Tensor({2}, {1, 2}));
        CHECK_THROWS_AS(tape.backward(w), ContractError);
    }
}

namespace {

// Random network + input whose pre-activations stay clear of the ReLU kink,
// so central differences are valid at h = 1e-4.
struct GradCheckCase {
    ParameterStore store;
    Tensor x;
    size_t label;
};

bool kink_safe(const ParameterStore& store, const Tensor& x, double margin) {
    Tensor cur = x;
    const size_t L = store.spec.layers.size();
    for (size_t li = 0; li + 1 < L; ++li) {
        const LayerSpec& l = store.spec.layers[li];
        Tensor out;
        if (l.kind == LayerSpec::Kind::Dense) {
            out = Tensor({l.out});
            for (size_t o = 0; o < l.out; ++o) {
                double acc = store.biases[li].data[o];
                for (size_t i = 0; i < l.in; ++i) acc += store.weights[li].data[o * l.in + i] * cur.data[i];
                out.data[o] = acc;
            }
        } else {
            const size_t h = cur.shape[1], w = cur.shape[2], k = l.k;
            const size_t ho = h - k + 1, wo = w - k + 1;
            out = Tensor({l.c_out, ho, wo});
            for (size_t o = 0; o < l.c_out; ++o) {
                for (size_t i = 0; i < ho; ++i) {
                    for (size_t j = 0; j < wo; ++j) {
                        double acc = store.biases[li].data[o];
                        for (size_t c = 0; c < l.c_in; ++c)
                            for (size_t p = 0; p < k; ++p)
                                for (size_t q = 0; q < k; ++q)
                                    acc += store.weights[li].data[((o * l.c_in + c) * k + p) * k + q] *
                                           cur.data[(c * h + i + p) * w + j + q];
                        out.data[(o * ho + i) * wo + j] = acc;
                    }
                }
            }
        }
        for (double v : out.data) {
            if (std::fabs(v) < margin) return false;
        }
        for (double& v : out.data) v = v > 0.0 ? v : 0.0;
        cur = std::move(out);
    }
    return true;
}

GradCheckCase random_mlp_case(Rng& rng) {
    for (;;) {
        NetworkSpec spec;
        const size_t depth = 1 + size_t(rng.below(3));
        const size_t in = 2 + size_t(rng.below(8));
        const size_t classes = 2 + size_t(rng.below(4));
        spec.input_dim = in;
        spec.class_count = classes;
        size_t cur = in;
        for (size_t l = 0; l + 1 < depth; ++l) {
            const size_t width = 2 + size_t(rng.below(31));
            spec.layers.push_back(LayerSpec::dense(cur, width));
            cur = width;
        }
        spec.layers.push_back(LayerSpec::dense(cur, classes));
        GradCheckCase c{init_network(spec, rng.next_u64()), Tensor({in}), rng.below(classes)};
        for (double& v : c.x.data) v = rng.normal();
        if (kink_safe(c.store, c.x, 5e-3)) return c;
    }
}

GradCheckCase random_cnn_case(Rng& rng) {
    for (;;) {
        NetworkSpec spec;
        const size_t side = 5 + size_t(rng.below(3));
        const size_t c_in = 1 + size_t(rng.below(2));
        const size_t c_mid = 1 + size_t(rng.below(3));
        const size_t k = 2 + size_t(rng.below(2));
        const size_t classes = 2 + size_t(rng.below(3));
        spec.input_shape = {c_in, side, side};
        spec.class_count = classes;
        spec.layers.push_back(LayerSpec::conv(c_in, c_mid, k));
        const size_t out_side = side - k + 1;
        spec.layers.push_back(LayerSpec::dense(c_mid * out_side * out_side, classes));
        GradCheckCase c{init_network(spec, rng.next_u64()), Tensor({c_in, side, side}),
                        rng.below(classes)};
        for (double& v : c.x.data) v = rng.normal();
        if (kink_safe(c.store, c.x, 5e-3)) return c;
    }
}

// Max-norm relative disagreement between reverse-mode and the FD oracle.
double grad_check(const GradCheckCase& c) {
    Tape tape;
    const TapedForward tf = forward_on_tape(tape, c.store, c.x);
    const int loss = tape.softmax_cross_entropy(tf.logits, c.label);
    tape.backward(loss);

    std::vector<double> reverse;
    for (size_t li = 0; li < c.store.spec.layers.size(); ++li) {
        const Tensor& gw = tape.gradient(tf.weight_leaves[li]);
        reverse.insert(reverse.end(), gw.data.begin(), gw.data.end());
        const Tensor& gb = tape.gradient(tf.bias_leaves[li]);
        reverse.insert(reverse.end(), gb.data.begin(), gb.data.end());
    }

    const std::vector<double> fd = finite_difference_oracle(
        [&](const ParameterStore& p) {
            Tape t;
            const TapedForward f = forward_on_tape(t, p, c.x);
            return t.value(t.softmax_cross_entropy(f.logits, c.label)).data[0];
        },
        c.store, 1e-4);

    double scale = 0.0;
    for (double v : fd) scale = std::max(scale, std::fabs(v));
    scale = std::max(scale, 1e-8);
    double worst = 0.0;
    for (size_t i = 0; i < fd.size(); ++i) worst = std::max(worst, std::fabs(reverse[i] - fd[i]));
    return worst / scale;
}

}  // namespace

TEST_CASE("reverse-mode matches the finite-difference oracle on MLPs") {
    Rng rng(2024);
    for (int trial = 0; trial < 12; ++trial) {
        const GradCheckCase c = random_mlp_case(rng);
        CHECK(grad_check(c) <= 1e-5);
    }
}

TEST_CASE("reverse-mode matches the finite-difference oracle on CNNs") {
    Rng rng(4048);
    for (int trial = 0; trial < 4; ++trial) {
        const GradCheckCase c = random_cnn_case(rng);
        CHECK(grad_check(c) <= 1e-5);
    }
}

TEST_CASE("finite difference oracle basics") {
    // f(theta) = theta^2 at theta = 3
    const auto grad = finite_difference_gradient(
        [](const std::vector<double>& th) { return th[0] * th[0]; }, {3.0}, 1e-4);
    CHECK(grad[0] == doctest::Approx(6.0).epsilon(1e-7));

    const auto zero = finite_difference_gradient(
        [](const std::vector<double>&) { return 42.0; }, {1.0, 2.0, 3.0}, 1e-4);
    for (double g : zero) CHECK(g == 0.0);

    CHECK_THROWS_AS(finite_difference_gradient(
                        [](const std::vector<double>&) { return 0.0; }, {1.0}, 0.0),
                    ContractError);
}

TEST_CASE("replaying a tape yields bit-identical gradients") {
    Rng rng(555);
    const GradCheckCase c = random_mlp_case(rng);
    std::vector<double> first, second;
    for (int round = 0; round < 2; ++round) {
        Tape tape;
        const TapedForward tf = forward_on_tape(tape, c.store, c.x);
        tape.backward(tape.softmax_cross_entropy(tf.logits, c.label));
        std::vector<double>& out = round == 0 ? first : second;
        for (size_t li = 0; li < c.store.spec.layers.size(); ++li) {
            const Tensor& gw = tape.gradient(tf.weight_leaves[li]);
            out.insert(out.end(), gw.data.begin(), gw.data.end());
        }
    }
    CHECK(first == second);
}

TEST_CASE("batched ops agree with per-sample ops") {
    Rng rng(77);
    NetworkSpec spec;
    spec.input_dim = 4;
    spec.class_count = 3;
    spec.layers = {LayerSpec::dense(4, 6), LayerSpec::dense(6, 3)};
    const ParameterStore store = init_network(spec, 9);

    Tensor X({3, 4});
    std::vector<size_t> labels = {0, 2, 1};
    for (double& v : X.data) v = rng.normal();

    Tape batch_tape;
    const TapedForward btf = forward_on_tape(batch_tape, store, X);
    const int bloss = batch_tape.softmax_cross_entropy_batch(btf.logits, labels);
    batch_tape.backward(bloss);

    // mean of per-sample losses and gradients
    double loss_sum = 0.0;
    Tensor grad_sum(store.weights[0].shape);
    for (size_t r = 0; r < 3; ++r) {
        Tensor x({4});
        for (size_t i = 0; i < 4; ++i) x.data[i] = X.data[r * 4 + i];
        Tape t;
        const TapedForward tf = forward_on_tape(t, store, x);
        const int loss = t.softmax_cross_entropy(tf.logits, labels[r]);
        loss_sum += t.value(loss).data[0];
        t.backward(loss);
        for (size_t i = 0; i < grad_sum.size(); ++i)
            grad_sum.data[i] += t.gradient(tf.weight_leaves[0]).data[i] / 3.0;
    }
    CHECK(batch_tape.value(bloss).data[0] == doctest::Approx(loss_sum / 3.0).epsilon(1e-12));
    for (size_t i = 0; i < grad_sum.size(); ++i) {
        CHECK(batch_tape.gradient(btf.weight_leaves[0]).data[i] ==
              doctest::Approx(grad_sum.data[i]).epsilon(1e-10));
    }
}
