#pragma once

#include <string>
#include <utility>
#include <vector>

#include "adaloc/network.hpp"

namespace adaloc {

enum class KeyStrategy { Top, PoolSample, Random, Bottom };
std::string strategy_name(KeyStrategy s);
KeyStrategy strategy_from_name(const std::string& name);

struct KeySpec {
    double rho = 0.05;
    double pool_fraction = 0.05;
    KeyStrategy strategy = KeyStrategy::Top;
    std::string granularity = "unit";
    uint64_t seed = 0;

    void validate() const;
};

struct KeyEntry {
    size_t index = 0;
    double value = 0.0;
};

// kappa = {(i, v_i)}: flat indices strictly increasing, values read from the
// model the key was minted against.
struct Key {
    std::vector<KeyEntry> entries;
    std::vector<std::pair<size_t, size_t>> unit_list;  // (layer, unit)
    KeySpec spec;
    Hash32 base_model_hash{};

    std::vector<size_t> indices() const;
    void validate() const;
};

// Per-unit sum of absolute incoming weights: dense rows of |W|, conv filters
// summed over c_in * k * k.
std::vector<double> unit_l1_norms(const ParameterStore& params, size_t layer);

// Top-rho selection per layer (ties to the lower unit index), entries covering
// the selected units' incoming weights and biases plus the successor-layer
// weights attached to their outputs.
Key localize_key(const ParameterStore& params, const KeySpec& spec);

// Uniform sample of ceil(rho * units) from the top pool_fraction units.
Key sample_key_pool(const ParameterStore& params, const KeySpec& spec);

// strategy Random: seeded uniform unit choice; Bottom: smallest l1 norms.
Key baseline_key(const ParameterStore& params, const KeySpec& spec);

std::string key_encode(const Key& key);
Key key_decode(const std::string& text);

void write_key(const std::string& path, const Key& key);
Key read_key(const std::string& path);

}  // namespace adaloc
