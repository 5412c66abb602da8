#include "adaloc/keying.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "adaloc/model_io.hpp"
#include "adaloc/rng.hpp"

namespace adaloc {

std::string strategy_name(KeyStrategy s) {
    switch (s) {
        case KeyStrategy::Top: return "top";
        case KeyStrategy::PoolSample: return "pool-sample";
        case KeyStrategy::Random: return "random";
        case KeyStrategy::Bottom: return "bottom";
    }
    throw ValidationError("unknown key strategy");
}

KeyStrategy strategy_from_name(const std::string& name) {
    if (name == "top") return KeyStrategy::Top;
    if (name == "pool-sample") return KeyStrategy::PoolSample;
    if (name == "random") return KeyStrategy::Random;
    if (name == "bottom") return KeyStrategy::Bottom;
    throw ValidationError("unknown key strategy: " + name);
}

void KeySpec::validate() const {
    if (!(rho > 0.0) || rho > 1.0) throw ValidationError("key spec: rho must be in (0, 1]");
    if (strategy == KeyStrategy::PoolSample && (pool_fraction < rho || pool_fraction > 1.0))
        throw ValidationError("key spec: need rho <= pool_fraction <= 1");
}

std::vector<size_t> Key::indices() const {
    std::vector<size_t> out;
    out.reserve(entries.size());
    for (const KeyEntry& e : entries) out.push_back(e.index);
    return out;
}

void Key::validate() const {
    spec.validate();
    if (entries.empty()) throw ValidationError("key has no entries");
    for (size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].index <= entries[i - 1].index)
            throw ValidationError("key entry indices must be strictly increasing");
    }
}

std::vector<double> unit_l1_norms(const ParameterStore& params, size_t layer) {
    if (layer >= params.spec.layers.size()) throw IndexError("unit_l1_norms: layer out of range");
    const LayerSpec& l = params.spec.layers[layer];
    const Tensor& W = params.weights[layer];
    const size_t per_unit = l.weights_per_unit();
    std::vector<double> norms(l.unit_count(), 0.0);
    for (size_t u = 0; u < norms.size(); ++u) {
        const double* row = &W.data[u * per_unit];
        double acc = 0.0;
        for (size_t i = 0; i < per_unit; ++i) acc += std::fabs(row[i]);
        norms[u] = acc;
    }
    return norms;
}

namespace {

// Unit indices sorted by descending norm, ties broken toward the lower index.
std::vector<size_t> rank_desc(const std::vector<double>& norms) {
    std::vector<size_t> order(norms.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return norms[a] > norms[b]; });
    return order;
}

std::vector<size_t> select_units(const std::vector<double>& norms, const KeySpec& spec, Rng& rng) {
    const size_t n = norms.size();
    const size_t n_sel = size_t(std::ceil(spec.rho * double(n)));
    if (n_sel == 0 || n_sel > n) throw ContractError("key selection count out of range");
    std::vector<size_t> chosen;
    switch (spec.strategy) {
        case KeyStrategy::Top: {
            const std::vector<size_t> order = rank_desc(norms);
            chosen.assign(order.begin(), order.begin() + long(n_sel));
            break;
        }
        case KeyStrategy::Bottom: {
            std::vector<size_t> order(n);
            for (size_t i = 0; i < n; ++i) order[i] = i;
            std::stable_sort(order.begin(), order.end(),
                             [&](size_t a, size_t b) { return norms[a] < norms[b]; });
            chosen.assign(order.begin(), order.begin() + long(n_sel));
            break;
        }
        case KeyStrategy::Random: {
            chosen = rng.sample_without_replacement(n, n_sel);
            break;
        }
        case KeyStrategy::PoolSample: {
            const size_t pool_n = size_t(std::ceil(spec.pool_fraction * double(n)));
            if (pool_n < n_sel) throw ContractError("key pool smaller than the selection request");
            const std::vector<size_t> order = rank_desc(norms);
            const std::vector<size_t> picks = rng.sample_without_replacement(pool_n, n_sel);
            for (size_t p : picks) chosen.push_back(order[p]);
            break;
        }
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

Key build_key(const ParameterStore& params, const KeySpec& spec) {
    spec.validate();
    const NetworkSpec& net = params.spec;
    if (net.layers.size() < 2) throw ValidationError("key localization needs at least two layers");

    Key key;
    key.spec = spec;
    key.base_model_hash = content_hash(params);

    Rng base_rng(spec.seed);
    std::vector<size_t> flat_indices;
    const auto shapes = net.output_shapes();

    for (size_t li = 0; li + 1 < net.layers.size(); ++li) {
        const std::vector<double> norms = unit_l1_norms(params, li);
        Rng layer_rng = base_rng.fork(li);
        const std::vector<size_t> units = select_units(norms, spec, layer_rng);
        const LayerSpec& layer = net.layers[li];
        const LayerSpec& next = net.layers[li + 1];

        for (size_t u : units) {
            key.unit_list.emplace_back(li, u);
            for (size_t col = 0; col < layer.weights_per_unit(); ++col) {
                flat_indices.push_back(flat_index(net, {li, ParamRole::Weight, u, col}));
            }
            flat_indices.push_back(flat_index(net, {li, ParamRole::Bias, u, 0}));

            // Step (iv): successor-layer weights attached to this unit's
            // outputs, so the unlock can restore them as well.
            if (next.kind == LayerSpec::Kind::Dense) {
                size_t col_begin = u, col_end = u + 1;
                if (layer.kind == LayerSpec::Kind::Conv) {
                    const size_t plane = shapes[li][1] * shapes[li][2];
                    col_begin = u * plane;
                    col_end = (u + 1) * plane;
                }
                for (size_t r = 0; r < next.unit_count(); ++r) {
                    for (size_t col = col_begin; col < col_end; ++col) {
                        flat_indices.push_back(flat_index(net, {li + 1, ParamRole::Weight, r, col}));
                    }
                }
            } else {
                const size_t kk = next.k * next.k;
                for (size_t r = 0; r < next.unit_count(); ++r) {
                    for (size_t col = u * kk; col < (u + 1) * kk; ++col) {
                        flat_indices.push_back(flat_index(net, {li + 1, ParamRole::Weight, r, col}));
                    }
                }
            }
        }
    }

    std::sort(flat_indices.begin(), flat_indices.end());
    flat_indices.erase(std::unique(flat_indices.begin(), flat_indices.end()), flat_indices.end());
    key.entries.reserve(flat_indices.size());
    for (size_t idx : flat_indices) key.entries.push_back({idx, params.get_flat(idx)});
    key.validate();
    return key;
}

}  // namespace

Key localize_key(const ParameterStore& params, const KeySpec& spec) {
    if (spec.strategy != KeyStrategy::Top) throw ContractError("localize_key requires strategy=top");
    KeySpec normalized = spec;
    normalized.pool_fraction = spec.rho;  // unused for top selection
    return build_key(params, normalized);
}

Key sample_key_pool(const ParameterStore& params, const KeySpec& spec) {
    if (spec.strategy != KeyStrategy::PoolSample)
        throw ContractError("sample_key_pool requires strategy=pool-sample");
    return build_key(params, spec);
}

Key baseline_key(const ParameterStore& params, const KeySpec& spec) {
    if (spec.strategy != KeyStrategy::Random && spec.strategy != KeyStrategy::Bottom)
        throw ContractError("baseline_key requires strategy random or bottom");
    KeySpec normalized = spec;
    normalized.pool_fraction = spec.rho;
    return build_key(params, normalized);
}

std::string key_encode(const Key& key) {
    key.validate();
    nlohmann::json j;
    j["version"] = 1;
    j["base_model_hash"] = hash_to_hex(key.base_model_hash);
    j["spec"] = {{"rho", key.spec.rho},
                 {"pool_fraction", key.spec.pool_fraction},
                 {"strategy", strategy_name(key.spec.strategy)},
                 {"granularity", key.spec.granularity},
                 {"seed", key.spec.seed}};
    nlohmann::json units = nlohmann::json::array();
    for (const auto& [layer, unit] : key.unit_list) units.push_back({layer, unit});
    j["unit_list"] = std::move(units);
    nlohmann::json entries = nlohmann::json::array();
    for (const KeyEntry& e : key.entries) entries.push_back({e.index, e.value});
    j["entries"] = std::move(entries);
    return j.dump();
}

Key key_decode(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad key JSON: ") + e.what());
    }
    Key key;
    try {
        key.base_model_hash = hash_from_hex(j.at("base_model_hash").get<std::string>());
        const auto& s = j.at("spec");
        key.spec.rho = s.at("rho").get<double>();
        key.spec.pool_fraction = s.at("pool_fraction").get<double>();
        key.spec.strategy = strategy_from_name(s.at("strategy").get<std::string>());
        key.spec.granularity = s.at("granularity").get<std::string>();
        key.spec.seed = s.at("seed").get<uint64_t>();
        for (const auto& u : j.at("unit_list")) {
            key.unit_list.emplace_back(u.at(0).get<size_t>(), u.at(1).get<size_t>());
        }
        for (const auto& e : j.at("entries")) {
            key.entries.push_back({e.at(0).get<size_t>(), e.at(1).get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("key JSON missing fields: ") + e.what());
    }
    key.validate();
    return key;
}

void write_key(const std::string& path, const Key& key) { atomic_write_file(path, key_encode(key)); }

Key read_key(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open key file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return key_decode(text);
}

}  // namespace adaloc
