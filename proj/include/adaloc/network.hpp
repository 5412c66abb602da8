#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "adaloc/autograd.hpp"
#include "adaloc/sha256.hpp"
#include "adaloc/tensor.hpp"

namespace adaloc {

struct LayerSpec {
    enum class Kind { Dense, Conv };
    Kind kind = Kind::Dense;
    size_t in = 0, out = 0;            // dense
    size_t c_in = 0, c_out = 0, k = 0; // conv

    static LayerSpec dense(size_t in, size_t out) {
        LayerSpec l;
        l.kind = Kind::Dense;
        l.in = in;
        l.out = out;
        return l;
    }
    static LayerSpec conv(size_t c_in, size_t c_out, size_t k) {
        LayerSpec l;
        l.kind = Kind::Conv;
        l.c_in = c_in;
        l.c_out = c_out;
        l.k = k;
        return l;
    }

    // A "unit" is a dense output neuron or a conv filter.
    size_t unit_count() const { return kind == Kind::Dense ? out : c_out; }
    size_t weights_per_unit() const { return kind == Kind::Dense ? in : c_in * k * k; }
    size_t weight_count() const { return unit_count() * weights_per_unit(); }
    size_t bias_count() const { return unit_count(); }
    size_t param_count() const { return weight_count() + bias_count(); }

    bool operator==(const LayerSpec&) const = default;
};

// Architecture of f(x; theta): dense/conv layers, ReLU after every hidden
// layer, linear final layer.
struct NetworkSpec {
    std::vector<LayerSpec> layers;
    size_t input_dim = 0;                       // dense-entry networks
    std::array<size_t, 3> input_shape{0, 0, 0}; // conv-entry networks (c, h, w)
    size_t class_count = 0;

    void validate() const;
    size_t param_count() const;
    size_t layer_count() const { return layers.size(); }

    // Output spatial shape (c, h, w) per layer; dense outputs use (out, 1, 1).
    std::vector<std::array<size_t, 3>> output_shapes() const;

    nlohmann::json to_json() const;
    static NetworkSpec from_json(const nlohmann::json& j);
    std::string canonical_json() const;

    bool operator==(const NetworkSpec&) const = default;
};

enum class ModelTag { Pretrained, FullFinetuned, KeyFinetuned, Locked };
std::string tag_name(ModelTag tag);
ModelTag tag_from_name(const std::string& name);

// The full weight/bias vector with a layer-structured view. flatten() orders
// coordinates layer-major, weights before biases, row-major within a layer;
// this ordering is normative for key files and the model format.
struct ParameterStore {
    NetworkSpec spec;
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
    ModelTag tag = ModelTag::Pretrained;

    size_t dim() const;
    std::vector<size_t> layer_offsets() const;

    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);

    double get_flat(size_t index) const;
    void set_flat(size_t index, double value);
};

enum class ParamRole { Weight, Bias };

// (layer, role, row, col): row is the unit index, col the position inside the
// unit's incoming weights (dense: input index; conv: c_in*k*k offset).
struct Coordinate {
    size_t layer = 0;
    ParamRole role = ParamRole::Weight;
    size_t row = 0;
    size_t col = 0;

    bool operator==(const Coordinate&) const = default;
};

size_t flat_index(const NetworkSpec& spec, const Coordinate& c);
Coordinate coordinate_at(const NetworkSpec& spec, size_t flat);

// He initialization: weights ~ N(0, 2/fan_in), biases zero.
ParameterStore init_network(const NetworkSpec& spec, uint64_t seed);

Tensor forward(const ParameterStore& params, const Tensor& x);

// Batched forward for dense-only networks; X is [n, input_dim].
Tensor forward_batch(const ParameterStore& params, const Tensor& X);

struct TapedForward {
    int logits = -1;
    int input = -1;
    std::vector<int> weight_leaves;
    std::vector<int> bias_leaves;
};

TapedForward forward_on_tape(Tape& tape, const ParameterStore& params, const Tensor& x);

// SHA-256 over the canonical spec JSON plus the flat parameter vector as
// little-endian doubles. The tag is deliberately excluded: a key minted from a
// pretrained store must verify reconstructions carrying other tags.
Hash32 content_hash(const ParameterStore& params);

// Central-difference gradient of a scalar loss over a parameter store.
std::vector<double> finite_difference_oracle(
    const std::function<double(const ParameterStore&)>& f,
    const ParameterStore& params, double h);

}  // namespace adaloc
