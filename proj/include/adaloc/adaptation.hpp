#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adaloc/data.hpp"
#include "adaloc/keying.hpp"
#include "adaloc/network.hpp"

namespace adaloc {

enum class TrainStrategy { Full, KeyTop, KeyPool, KeyRandom, KeyBottom };
std::string train_strategy_name(TrainStrategy s);
TrainStrategy train_strategy_from_name(const std::string& name);
bool is_key_strategy(TrainStrategy s);

// Structured-sparsity pretraining recipe (off by default): floored proximal
// group-L1 on hidden-unit rows over the given phases, then magnitude
// rank-pruning to keep_units per hidden layer, then clean epochs. Produces a
// checkpoint whose impact concentrates in few units, the regime the key
// mechanism operates in. Adaptation never uses this.
struct SparsifyPhase {
    size_t epochs = 0;
    double lambda = 0.0;
};

struct SparsifyConfig {
    std::vector<SparsifyPhase> phases;
    double unit_floor = 0.0;
    size_t keep_units = 0;  // 0 disables the rank-prune step
    size_t clean_epochs = 0;
};

struct TrainConfig {
    double eta = 0.1;
    size_t epochs = 10;
    size_t batch_size = 32;
    uint64_t seed = 0;
    TrainStrategy strategy = TrainStrategy::Full;
    double momentum = 0.0;  // plain SGD by default
    std::optional<SparsifyConfig> sparsify;

    void validate() const;
};

// Coordinates allowed to move; everything else stays bit-identical.
struct UpdateMask {
    std::vector<uint8_t> allowed;

    static UpdateMask all(size_t d);
    static UpdateMask none(size_t d);
    static UpdateMask from_key(const NetworkSpec& spec, const Key& key);
    size_t count() const;
};

struct EpochMetric {
    size_t epoch = 0;
    std::string split;
    double loss = 0.0;
    double accuracy = 0.0;
};

struct FinetuneResult {
    ParameterStore params;
    std::vector<EpochMetric> metrics;
};

// One SGD step on a batch: theta_j -= eta * mean-gradient_j for j in the mask,
// bit-identical elsewhere.
ParameterStore masked_sgd_step(const ParameterStore& params, const std::vector<Sample>& batch,
                               const UpdateMask& mask, double eta);

// Shuffled mini-batch masked SGD; key required exactly for key strategies.
// eval_data, when given, adds a test metrics row per epoch.
FinetuneResult finetune(const ParameterStore& params, const Dataset& train_data,
                        const Dataset* eval_data, const TrainConfig& config,
                        const Key* key = nullptr);

struct GradProfile;

// finetune that also fills the per-unit update profile of the run.
FinetuneResult finetune_profiled(const ParameterStore& params, const Dataset& train_data,
                                 const Dataset* eval_data, const TrainConfig& config,
                                 const Key* key, GradProfile* profile);

// Euclidean distance over coordinates not in `exclude`.
double param_distance(const ParameterStore& a, const ParameterStore& b,
                      const std::vector<size_t>& exclude);

struct UnitProfile {
    size_t layer = 0;
    size_t unit = 0;
    double initial_l1 = 0.0;
    double accumulated_update = 0.0;
};

struct GradProfile {
    std::vector<UnitProfile> units;
    // One entry per layer that has units; nullopt when correlation undefined.
    std::vector<std::optional<double>> per_layer_spearman;
};

// Initial incoming l1 norm vs summed |update| on incoming weights, per unit,
// over a training run with the given config.
GradProfile grad_accumulation_profile(const ParameterStore& params, const Dataset& train_data,
                                      const TrainConfig& config, const Key* key = nullptr);

void write_metrics_csv(const std::string& path, const std::vector<EpochMetric>& metrics);

}  // namespace adaloc
