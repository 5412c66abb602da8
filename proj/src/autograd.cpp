#include "adaloc/autograd.hpp"

#include <cmath>

namespace adaloc {

int Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return int(nodes_.size()) - 1;
}

void Tape::reset() {
    nodes_.clear();
    grads_.clear();
}

int Tape::leaf(Tensor value) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    return push(std::move(n));
}

int Tape::affine(int w, int b, int x) {
    const Tensor& W = value(w);
    const Tensor& B = value(b);
    const Tensor& X = value(x);
    if (W.rank() != 2) throw DimensionError("affine: weight must be a matrix");
    const size_t out = W.shape[0], in = W.shape[1];
    if (B.size() != out) throw DimensionError("affine: bias length must equal output size");
    Node n;
    n.op = Op::Affine;
    n.a = w;
    n.b = b;
    n.c = x;
    if (X.rank() == 1) {
        if (X.size() != in) throw DimensionError("affine: input length must equal weight columns");
        Tensor y({out});
        for (size_t o = 0; o < out; ++o) {
            const double* wr = &W.data[o * in];
            double acc = B.data[o];
            for (size_t i = 0; i < in; ++i) acc += wr[i] * X.data[i];
            y.data[o] = acc;
        }
        n.value = std::move(y);
    } else if (X.rank() == 2) {
        if (X.shape[1] != in) throw DimensionError("affine: batch input columns must equal weight columns");
        const size_t batch = X.shape[0];
        Tensor y({batch, out});
        for (size_t r = 0; r < batch; ++r) {
            const double* xr = &X.data[r * in];
            double* yr = &y.data[r * out];
            for (size_t o = 0; o < out; ++o) {
                const double* wr = &W.data[o * in];
                double acc = B.data[o];
                for (size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
                yr[o] = acc;
            }
        }
        n.value = std::move(y);
    } else {
        throw DimensionError("affine: input must be rank 1 or 2");
    }
    return push(std::move(n));
}

int Tape::relu(int x) {
    Node n;
    n.op = Op::Relu;
    n.a = x;
    n.value = value(x);
    for (double& v : n.value.data) v = v > 0.0 ? v : 0.0;
    return push(std::move(n));
}

int Tape::conv2d(int kernels, int x) {
    const Tensor& K = value(kernels);
    const Tensor& X = value(x);
    if (K.rank() != 4) throw DimensionError("conv2d: kernels must be [c_out, c_in, k, k]");
    if (X.rank() != 3) throw DimensionError("conv2d: input must be [c_in, H, W]");
    const size_t co = K.shape[0], ci = K.shape[1], k = K.shape[2];
    if (K.shape[3] != k) throw DimensionError("conv2d: kernels must be square");
    if (X.shape[0] != ci) throw DimensionError("conv2d: input channels must match kernels");
    const size_t h = X.shape[1], w = X.shape[2];
    if (k > h || k > w) throw DimensionError("conv2d: kernel larger than input");
    const size_t ho = h - k + 1, wo = w - k + 1;
    Node n;
    n.op = Op::Conv2d;
    n.a = kernels;
    n.c = x;
    Tensor y({co, ho, wo});
    for (size_t o = 0; o < co; ++o) {
        for (size_t i = 0; i < ho; ++i) {
            for (size_t j = 0; j < wo; ++j) {
                double acc = 0.0;
                for (size_t c = 0; c < ci; ++c) {
                    for (size_t p = 0; p < k; ++p) {
                        const double* xr = &X.data[(c * h + i + p) * w + j];
                        const double* kr = &K.data[((o * ci + c) * k + p) * k];
                        for (size_t q = 0; q < k; ++q) acc += kr[q] * xr[q];
                    }
                }
                y.data[(o * ho + i) * wo + j] = acc;
            }
        }
    }
    n.value = std::move(y);
    return push(std::move(n));
}

int Tape::channel_bias(int x, int b) {
    const Tensor& X = value(x);
    const Tensor& B = value(b);
    if (X.rank() != 3) throw DimensionError("channel_bias: input must be [c, H, W]");
    if (B.size() != X.shape[0]) throw DimensionError("channel_bias: one bias per channel");
    Node n;
    n.op = Op::ChannelBias;
    n.a = x;
    n.b = b;
    n.value = X;
    const size_t plane = X.shape[1] * X.shape[2];
    for (size_t c = 0; c < X.shape[0]; ++c) {
        for (size_t i = 0; i < plane; ++i) n.value.data[c * plane + i] += B.data[c];
    }
    return push(std::move(n));
}

int Tape::reshape(int x, std::vector<size_t> shape) {
    const Tensor& X = value(x);
    if (Tensor::count(shape) != X.size()) throw DimensionError("reshape: element count mismatch");
    Node n;
    n.op = Op::Reshape;
    n.a = x;
    n.value = Tensor(std::move(shape), X.data);
    return push(std::move(n));
}

int Tape::softmax_cross_entropy(int logits, size_t label) {
    const Tensor& Z = value(logits);
    if (Z.rank() != 1) throw DimensionError("softmax_cross_entropy: logits must be rank 1");
    if (label >= Z.size()) throw IndexError("softmax_cross_entropy: label out of range");
    Node n;
    n.op = Op::SoftmaxXent;
    n.a = logits;
    n.labels = {label};
    double max = Z.data[0];
    for (double v : Z.data) max = std::max(max, v);
    Tensor p = Z;
    double sum = 0.0;
    for (double& v : p.data) {
        v = std::exp(v - max);
        sum += v;
    }
    for (double& v : p.data) v /= sum;
    const double loss = -(Z.data[label] - max - std::log(sum));
    n.saved = std::move(p);
    n.value = Tensor::scalar(loss);
    return push(std::move(n));
}

int Tape::softmax_cross_entropy_batch(int logits, std::vector<size_t> labels) {
    const Tensor& Z = value(logits);
    if (Z.rank() != 2) throw DimensionError("softmax_cross_entropy_batch: logits must be rank 2");
    const size_t batch = Z.shape[0], k = Z.shape[1];
    if (labels.size() != batch) throw DimensionError("softmax_cross_entropy_batch: one label per row");
    Node n;
    n.op = Op::SoftmaxXentBatch;
    n.a = logits;
    Tensor p = Z;
    double loss = 0.0;
    for (size_t r = 0; r < batch; ++r) {
        if (labels[r] >= k) throw IndexError("softmax_cross_entropy_batch: label out of range");
        double* row = &p.data[r * k];
        double max = row[0];
        for (size_t i = 1; i < k; ++i) max = std::max(max, row[i]);
        double sum = 0.0;
        for (size_t i = 0; i < k; ++i) {
            row[i] = std::exp(row[i] - max);
            sum += row[i];
        }
        for (size_t i = 0; i < k; ++i) row[i] /= sum;
        loss += -(Z.data[r * k + labels[r]] - max - std::log(sum));
    }
    n.labels = std::move(labels);
    n.saved = std::move(p);
    n.value = Tensor::scalar(loss / double(batch));
    return push(std::move(n));
}

void Tape::backward(int root) {
    if (root < 0 || size_t(root) >= nodes_.size()) throw ContractError("backward: invalid root node");
    if (nodes_[size_t(root)].value.size() != 1) throw ContractError("backward: root must be scalar");

    grads_.resize(nodes_.size());
    for (size_t i = 0; i < nodes_.size(); ++i) {
        if (!grads_[i].same_shape(nodes_[i].value)) grads_[i] = Tensor(nodes_[i].value.shape);
        else std::fill(grads_[i].data.begin(), grads_[i].data.end(), 0.0);
    }
    grads_[size_t(root)].data[0] = 1.0;

    for (int id = root; id >= 0; --id) {
        const Node& n = nodes_[size_t(id)];
        const Tensor& g = grads_[size_t(id)];
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Affine: {
                const Tensor& W = nodes_[size_t(n.a)].value;
                const Tensor& X = nodes_[size_t(n.c)].value;
                Tensor& gW = grads_[size_t(n.a)];
                Tensor& gB = grads_[size_t(n.b)];
                Tensor& gX = grads_[size_t(n.c)];
                const size_t out = W.shape[0], in = W.shape[1];
                if (X.rank() == 1) {
                    for (size_t o = 0; o < out; ++o) {
                        const double go = g.data[o];
                        if (go == 0.0) continue;
                        gB.data[o] += go;
                        double* gwr = &gW.data[o * in];
                        for (size_t i = 0; i < in; ++i) gwr[i] += go * X.data[i];
                        const double* wr = &W.data[o * in];
                        for (size_t i = 0; i < in; ++i) gX.data[i] += go * wr[i];
                    }
                } else {
                    const size_t batch = X.shape[0];
                    for (size_t r = 0; r < batch; ++r) {
                        const double* gr = &g.data[r * out];
                        const double* xr = &X.data[r * in];
                        double* gxr = &gX.data[r * in];
                        for (size_t o = 0; o < out; ++o) {
                            const double go = gr[o];
                            if (go == 0.0) continue;
                            gB.data[o] += go;
                            double* gwr = &gW.data[o * in];
                            for (size_t i = 0; i < in; ++i) gwr[i] += go * xr[i];
                            const double* wr = &W.data[o * in];
                            for (size_t i = 0; i < in; ++i) gxr[i] += go * wr[i];
                        }
                    }
                }
                break;
            }
            case Op::Relu: {
                Tensor& gX = grads_[size_t(n.a)];
                for (size_t i = 0; i < g.size(); ++i) {
                    if (n.value.data[i] > 0.0) gX.data[i] += g.data[i];
                }
                break;
            }
            case Op::Conv2d: {
                const Tensor& K = nodes_[size_t(n.a)].value;
                const Tensor& X = nodes_[size_t(n.c)].value;
                Tensor& gK = grads_[size_t(n.a)];
                Tensor& gX = grads_[size_t(n.c)];
                const size_t co = K.shape[0], ci = K.shape[1], k = K.shape[2];
                const size_t h = X.shape[1], w = X.shape[2];
                const size_t ho = n.value.shape[1], wo = n.value.shape[2];
                for (size_t o = 0; o < co; ++o) {
                    for (size_t i = 0; i < ho; ++i) {
                        for (size_t j = 0; j < wo; ++j) {
                            const double go = g.data[(o * ho + i) * wo + j];
                            if (go == 0.0) continue;
                            for (size_t c = 0; c < ci; ++c) {
                                for (size_t p = 0; p < k; ++p) {
                                    const double* xr = &X.data[(c * h + i + p) * w + j];
                                    double* gxr = &gX.data[(c * h + i + p) * w + j];
                                    const double* kr = &K.data[((o * ci + c) * k + p) * k];
                                    double* gkr = &gK.data[((o * ci + c) * k + p) * k];
                                    for (size_t q = 0; q < k; ++q) {
                                        gkr[q] += go * xr[q];
                                        gxr[q] += go * kr[q];
                                    }
                                }
                            }
                        }
                    }
                }
                break;
            }
            case Op::ChannelBias: {
                Tensor& gX = grads_[size_t(n.a)];
                Tensor& gB = grads_[size_t(n.b)];
                const size_t plane = n.value.shape[1] * n.value.shape[2];
                for (size_t c = 0; c < n.value.shape[0]; ++c) {
                    double acc = 0.0;
                    for (size_t i = 0; i < plane; ++i) {
                        gX.data[c * plane + i] += g.data[c * plane + i];
                        acc += g.data[c * plane + i];
                    }
                    gB.data[c] += acc;
                }
                break;
            }
            case Op::Reshape: {
                Tensor& gX = grads_[size_t(n.a)];
                for (size_t i = 0; i < g.size(); ++i) gX.data[i] += g.data[i];
                break;
            }
            case Op::SoftmaxXent: {
                Tensor& gZ = grads_[size_t(n.a)];
                const double go = g.data[0];
                const size_t label = n.labels[0];
                for (size_t i = 0; i < gZ.size(); ++i) {
                    gZ.data[i] += go * (n.saved.data[i] - (i == label ? 1.0 : 0.0));
                }
                break;
            }
            case Op::SoftmaxXentBatch: {
                Tensor& gZ = grads_[size_t(n.a)];
                const size_t batch = n.value.size() ? n.labels.size() : 0;
                const size_t k = gZ.size() / batch;
                const double go = g.data[0] / double(batch);
                for (size_t r = 0; r < batch; ++r) {
                    const size_t label = n.labels[r];
                    for (size_t i = 0; i < k; ++i) {
                        gZ.data[r * k + i] += go * (n.saved.data[r * k + i] - (i == label ? 1.0 : 0.0));
                    }
                }
                break;
            }
        }
    }
}

std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> theta, double h) {
    if (h <= 0.0) throw ContractError("finite_difference_gradient: h must be positive");
    std::vector<double> grad(theta.size());
    for (size_t i = 0; i < theta.size(); ++i) {
        const double keep = theta[i];
        theta[i] = keep + h;
        const double up = f(theta);
        theta[i] = keep - h;
        const double down = f(theta);
        theta[i] = keep;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

}  // namespace adaloc
