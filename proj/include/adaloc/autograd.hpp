#pragma once

#include <functional>
#include <vector>

#include "adaloc/tensor.hpp"

namespace adaloc {

// Reverse-mode tape. Nodes are recorded in execution order (operands precede
// outputs), so the backward sweep is a single reverse pass. A tape instance is
// meant to be reused: reset() keeps the node storage capacity.
class Tape {
  public:
    int leaf(Tensor value);

    // y = W x + b. W: [out, in], b: [out].
    // x may be [in] (single sample) or [n, in] (batch, row per sample).
    int affine(int w, int b, int x);

    int relu(int x);

    // Valid cross-correlation, stride 1. kernels: [c_out, c_in, k, k],
    // x: [c_in, H, W] -> [c_out, H-k+1, W-k+1].
    int conv2d(int kernels, int x);

    // x: [c, H, W] plus per-channel bias b: [c].
    int channel_bias(int x, int b);

    // Reinterpret values with a new shape of equal size (conv -> dense bridge).
    int reshape(int x, std::vector<size_t> shape);

    // -log softmax(logits)[label], max-subtracted. logits: [k].
    int softmax_cross_entropy(int logits, size_t label);

    // Mean of per-row losses. logits: [n, k], one label per row.
    int softmax_cross_entropy_batch(int logits, std::vector<size_t> labels);

    const Tensor& value(int id) const { return nodes_[size_t(id)].value; }
    size_t node_count() const { return nodes_.size(); }

    // Reverse accumulation from a scalar root. Gradients for every node are
    // available through gradient() until the next backward()/reset().
    void backward(int root);
    const Tensor& gradient(int id) const { return grads_[size_t(id)]; }

    void reset();

  private:
    enum class Op { Leaf, Affine, Relu, Conv2d, ChannelBias, Reshape, SoftmaxXent, SoftmaxXentBatch };

    struct Node {
        Op op;
        int a = -1, b = -1, c = -1;
        Tensor value;
        std::vector<size_t> labels;  // SoftmaxXent*: label(s)
        Tensor saved;                // SoftmaxXent*: softmax probabilities
    };

    int push(Node node);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

// Central differences (f(th + h e_i) - f(th - h e_i)) / 2h per coordinate.
// The independent oracle for reverse-mode gradients; never touches the tape.
std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> theta, double h);

}  // namespace adaloc
