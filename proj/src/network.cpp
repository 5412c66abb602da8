#include "adaloc/network.hpp"

#include <cmath>
#include <cstring>

#include "adaloc/rng.hpp"

namespace adaloc {

void NetworkSpec::validate() const {
    if (layers.empty()) throw ValidationError("network must have at least one layer");
    if (class_count == 0) throw ValidationError("class_count must be positive");
    bool spatial = input_shape[0] > 0;
    std::array<size_t, 3> shape = input_shape;
    size_t flat = spatial ? input_shape[0] * input_shape[1] * input_shape[2] : input_dim;
    if (flat == 0) throw ValidationError("network input size must be positive");
    for (size_t li = 0; li < layers.size(); ++li) {
        const LayerSpec& l = layers[li];
        if (l.kind == LayerSpec::Kind::Conv) {
            if (!spatial) throw ValidationError("conv layer after a dense layer is not supported");
            if (l.c_in != shape[0]) throw DimensionError("conv layer input channels do not conform");
            if (l.k == 0 || l.k > shape[1] || l.k > shape[2])
                throw DimensionError("conv kernel does not fit the input");
            shape = {l.c_out, shape[1] - l.k + 1, shape[2] - l.k + 1};
            flat = shape[0] * shape[1] * shape[2];
        } else {
            if (l.in != flat) throw DimensionError("dense layer input size does not conform");
            if (l.out == 0) throw ValidationError("dense layer output size must be positive");
            spatial = false;
            flat = l.out;
        }
    }
    if (layers.back().kind != LayerSpec::Kind::Dense)
        throw ValidationError("final layer must be dense");
    if (flat != class_count) throw DimensionError("final layer size must equal class_count");
}

size_t NetworkSpec::param_count() const {
    size_t n = 0;
    for (const LayerSpec& l : layers) n += l.param_count();
    return n;
}

std::vector<std::array<size_t, 3>> NetworkSpec::output_shapes() const {
    std::vector<std::array<size_t, 3>> out;
    std::array<size_t, 3> shape = input_shape[0] > 0 ? input_shape
                                                     : std::array<size_t, 3>{input_dim, 1, 1};
    for (const LayerSpec& l : layers) {
        if (l.kind == LayerSpec::Kind::Conv) {
            shape = {l.c_out, shape[1] - l.k + 1, shape[2] - l.k + 1};
        } else {
            shape = {l.out, 1, 1};
        }
        out.push_back(shape);
    }
    return out;
}

nlohmann::json NetworkSpec::to_json() const {
    nlohmann::json j;
    j["classes"] = class_count;
    if (input_shape[0] > 0) {
        j["input_shape"] = {input_shape[0], input_shape[1], input_shape[2]};
    } else {
        j["input_dim"] = input_dim;
    }
    nlohmann::json layers_json = nlohmann::json::array();
    for (const LayerSpec& l : layers) {
        if (l.kind == LayerSpec::Kind::Dense) {
            layers_json.push_back({{"type", "dense"}, {"in", l.in}, {"out", l.out}});
        } else {
            layers_json.push_back({{"type", "conv"}, {"c_in", l.c_in}, {"c_out", l.c_out}, {"k", l.k}});
        }
    }
    j["layers"] = std::move(layers_json);
    return j;
}

NetworkSpec NetworkSpec::from_json(const nlohmann::json& j) {
    NetworkSpec spec;
    spec.class_count = j.at("classes").get<size_t>();
    if (j.contains("input_shape")) {
        const auto& s = j.at("input_shape");
        spec.input_shape = {s.at(0).get<size_t>(), s.at(1).get<size_t>(), s.at(2).get<size_t>()};
    } else {
        spec.input_dim = j.at("input_dim").get<size_t>();
    }
    for (const auto& lj : j.at("layers")) {
        const std::string type = lj.at("type").get<std::string>();
        if (type == "dense") {
            spec.layers.push_back(LayerSpec::dense(lj.at("in").get<size_t>(), lj.at("out").get<size_t>()));
        } else if (type == "conv") {
            spec.layers.push_back(LayerSpec::conv(lj.at("c_in").get<size_t>(), lj.at("c_out").get<size_t>(),
                                                  lj.at("k").get<size_t>()));
        } else {
            throw ValidationError("unknown layer type: " + type);
        }
    }
    spec.validate();
    return spec;
}

std::string NetworkSpec::canonical_json() const { return to_json().dump(); }

std::string tag_name(ModelTag tag) {
    switch (tag) {
        case ModelTag::Pretrained: return "pretrained";
        case ModelTag::FullFinetuned: return "full-finetuned";
        case ModelTag::KeyFinetuned: return "key-finetuned";
        case ModelTag::Locked: return "locked";
    }
    throw ValidationError("unknown model tag");
}

ModelTag tag_from_name(const std::string& name) {
    if (name == "pretrained") return ModelTag::Pretrained;
    if (name == "full-finetuned") return ModelTag::FullFinetuned;
    if (name == "key-finetuned") return ModelTag::KeyFinetuned;
    if (name == "locked") return ModelTag::Locked;
    throw ValidationError("unknown model tag: " + name);
}

size_t ParameterStore::dim() const { return spec.param_count(); }

std::vector<size_t> ParameterStore::layer_offsets() const {
    std::vector<size_t> offsets;
    offsets.reserve(spec.layers.size());
    size_t cursor = 0;
    for (const LayerSpec& l : spec.layers) {
        offsets.push_back(cursor);
        cursor += l.param_count();
    }
    return offsets;
}

std::vector<double> ParameterStore::flatten() const {
    std::vector<double> flat;
    flat.reserve(dim());
    for (size_t li = 0; li < spec.layers.size(); ++li) {
        flat.insert(flat.end(), weights[li].data.begin(), weights[li].data.end());
        flat.insert(flat.end(), biases[li].data.begin(), biases[li].data.end());
    }
    return flat;
}

void ParameterStore::unflatten(const std::vector<double>& flat) {
    if (flat.size() != dim()) throw DimensionError("unflatten: length does not match parameter count");
    size_t cursor = 0;
    for (size_t li = 0; li < spec.layers.size(); ++li) {
        std::copy(flat.begin() + long(cursor), flat.begin() + long(cursor + weights[li].size()),
                  weights[li].data.begin());
        cursor += weights[li].size();
        std::copy(flat.begin() + long(cursor), flat.begin() + long(cursor + biases[li].size()),
                  biases[li].data.begin());
        cursor += biases[li].size();
    }
}

double ParameterStore::get_flat(size_t index) const {
    const Coordinate c = coordinate_at(spec, index);
    const LayerSpec& l = spec.layers[c.layer];
    if (c.role == ParamRole::Weight) return weights[c.layer].data[c.row * l.weights_per_unit() + c.col];
    return biases[c.layer].data[c.row];
}

void ParameterStore::set_flat(size_t index, double value) {
    const Coordinate c = coordinate_at(spec, index);
    const LayerSpec& l = spec.layers[c.layer];
    if (c.role == ParamRole::Weight) weights[c.layer].data[c.row * l.weights_per_unit() + c.col] = value;
    else biases[c.layer].data[c.row] = value;
}

size_t flat_index(const NetworkSpec& spec, const Coordinate& c) {
    if (c.layer >= spec.layers.size()) throw IndexError("flat_index: layer out of range");
    const LayerSpec& l = spec.layers[c.layer];
    size_t offset = 0;
    for (size_t li = 0; li < c.layer; ++li) offset += spec.layers[li].param_count();
    if (c.role == ParamRole::Weight) {
        if (c.row >= l.unit_count() || c.col >= l.weights_per_unit())
            throw IndexError("flat_index: weight coordinate out of range");
        return offset + c.row * l.weights_per_unit() + c.col;
    }
    if (c.row >= l.unit_count() || c.col != 0) throw IndexError("flat_index: bias coordinate out of range");
    return offset + l.weight_count() + c.row;
}

Coordinate coordinate_at(const NetworkSpec& spec, size_t flat) {
    size_t cursor = flat;
    for (size_t li = 0; li < spec.layers.size(); ++li) {
        const LayerSpec& l = spec.layers[li];
        if (cursor < l.weight_count()) {
            return {li, ParamRole::Weight, cursor / l.weights_per_unit(), cursor % l.weights_per_unit()};
        }
        cursor -= l.weight_count();
        if (cursor < l.bias_count()) {
            return {li, ParamRole::Bias, cursor, 0};
        }
        cursor -= l.bias_count();
    }
    throw IndexError("coordinate_at: flat index out of range");
}

ParameterStore init_network(const NetworkSpec& spec, uint64_t seed) {
    spec.validate();
    ParameterStore store;
    store.spec = spec;
    store.tag = ModelTag::Pretrained;
    Rng rng(seed);
    for (const LayerSpec& l : spec.layers) {
        const double stddev = std::sqrt(2.0 / double(l.weights_per_unit()));
        Tensor w(l.kind == LayerSpec::Kind::Dense
                     ? std::vector<size_t>{l.out, l.in}
                     : std::vector<size_t>{l.c_out, l.c_in, l.k, l.k});
        for (double& v : w.data) v = rng.normal(0.0, stddev);
        store.weights.push_back(std::move(w));
        store.biases.push_back(Tensor({l.unit_count()}));
    }
    return store;
}

Tensor forward(const ParameterStore& params, const Tensor& x) {
    Tensor cur = x;
    const size_t L = params.spec.layers.size();
    for (size_t li = 0; li < L; ++li) {
        const LayerSpec& l = params.spec.layers[li];
        if (l.kind == LayerSpec::Kind::Conv) {
            const Tensor& K = params.weights[li];
            if (cur.rank() != 3 || cur.shape[0] != l.c_in)
                throw DimensionError("forward: conv input shape mismatch");
            const size_t h = cur.shape[1], w = cur.shape[2], k = l.k;
            if (k > h || k > w) throw DimensionError("forward: conv kernel larger than input");
            const size_t ho = h - k + 1, wo = w - k + 1;
            Tensor y({l.c_out, ho, wo});
            for (size_t o = 0; o < l.c_out; ++o) {
                const double b = params.biases[li].data[o];
                for (size_t i = 0; i < ho; ++i) {
                    for (size_t j = 0; j < wo; ++j) {
                        double acc = b;
                        for (size_t c = 0; c < l.c_in; ++c) {
                            for (size_t p = 0; p < k; ++p) {
                                const double* xr = &cur.data[(c * h + i + p) * w + j];
                                const double* kr = &K.data[((o * l.c_in + c) * k + p) * k];
                                for (size_t q = 0; q < k; ++q) acc += kr[q] * xr[q];
                            }
                        }
                        y.data[(o * ho + i) * wo + j] = acc;
                    }
                }
            }
            cur = std::move(y);
        } else {
            if (cur.size() != l.in) throw DimensionError("forward: dense input size mismatch");
            const Tensor& W = params.weights[li];
            Tensor y({l.out});
            for (size_t o = 0; o < l.out; ++o) {
                const double* wr = &W.data[o * l.in];
                double acc = params.biases[li].data[o];
                for (size_t i = 0; i < l.in; ++i) acc += wr[i] * cur.data[i];
                y.data[o] = acc;
            }
            cur = std::move(y);
        }
        if (li + 1 < L) {
            for (double& v : cur.data) v = v > 0.0 ? v : 0.0;
        }
    }
    return cur;
}

Tensor forward_batch(const ParameterStore& params, const Tensor& X) {
    if (X.rank() != 2) throw DimensionError("forward_batch: input must be [n, dim]");
    const size_t n = X.shape[0];
    Tensor cur = X;
    const size_t L = params.spec.layers.size();
    for (size_t li = 0; li < L; ++li) {
        const LayerSpec& l = params.spec.layers[li];
        if (l.kind != LayerSpec::Kind::Dense)
            throw DimensionError("forward_batch: only dense networks are batched");
        if (cur.shape[1] != l.in) throw DimensionError("forward_batch: dense input size mismatch");
        Tensor y({n, l.out});
        for (size_t r = 0; r < n; ++r) {
            const double* xr = &cur.data[r * l.in];
            double* yr = &y.data[r * l.out];
            for (size_t o = 0; o < l.out; ++o) {
                const double* wr = &params.weights[li].data[o * l.in];
                double acc = params.biases[li].data[o];
                for (size_t i = 0; i < l.in; ++i) acc += wr[i] * xr[i];
                yr[o] = acc;
            }
        }
        if (li + 1 < L) {
            for (double& v : y.data) v = v > 0.0 ? v : 0.0;
        }
        cur = std::move(y);
    }
    return cur;
}

TapedForward forward_on_tape(Tape& tape, const ParameterStore& params, const Tensor& x) {
    TapedForward tf;
    tf.input = tape.leaf(x);
    int cur = tf.input;
    const size_t L = params.spec.layers.size();
    bool batch = params.spec.input_shape[0] == 0 && x.rank() == 2;
    for (size_t li = 0; li < L; ++li) {
        const LayerSpec& l = params.spec.layers[li];
        const int w = tape.leaf(params.weights[li]);
        const int b = tape.leaf(params.biases[li]);
        tf.weight_leaves.push_back(w);
        tf.bias_leaves.push_back(b);
        if (l.kind == LayerSpec::Kind::Conv) {
            cur = tape.conv2d(w, cur);
            cur = tape.channel_bias(cur, b);
        } else {
            if (tape.value(cur).rank() == 3 || (tape.value(cur).rank() == 2 && !batch)) {
                cur = tape.reshape(cur, {l.in});
            }
            cur = tape.affine(w, b, cur);
        }
        if (li + 1 < L) cur = tape.relu(cur);
    }
    tf.logits = cur;
    return tf;
}

Hash32 content_hash(const ParameterStore& params) {
    Sha256 h;
    const std::string spec_json = params.spec.canonical_json();
    h.update(spec_json.data(), spec_json.size());
    const std::vector<double> flat = params.flatten();
    std::vector<uint8_t> bytes(flat.size() * 8);
    for (size_t i = 0; i < flat.size(); ++i) {
        uint64_t bits;
        std::memcpy(&bits, &flat[i], 8);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + size_t(b)] = uint8_t(bits >> (8 * b));
    }
    h.update(bytes.data(), bytes.size());
    return h.finish();
}

std::vector<double> finite_difference_oracle(
    const std::function<double(const ParameterStore&)>& f,
    const ParameterStore& params, double h) {
    ParameterStore probe = params;
    return finite_difference_gradient(
        [&](const std::vector<double>& flat) {
            probe.unflatten(flat);
            return f(probe);
        },
        params.flatten(), h);
}

}  // namespace adaloc
