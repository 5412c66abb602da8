#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adaloc/adaptation.hpp"
#include "adaloc/bounds.hpp"
#include "adaloc/data.hpp"
#include "adaloc/keying.hpp"
#include "adaloc/network.hpp"

namespace adaloc {

// Dataset source in a manifest: a generator or files.
struct DataConfig {
    std::string kind;  // "blobs" | "images" | "idx" | "csv"
    BlobsConfig blobs;
    ImageTaskConfig images;
    size_t per_class_train = 0;  // generator kinds
    size_t per_class_test = 0;
    double feature_scale = 1.0;  // multiplies every input after load
    std::string train_images, train_labels, test_images, test_labels;  // idx
    std::string train_csv, test_csv;                                   // csv

    Dataset load(const std::string& split) const;  // "train" or "test"
    Dataset load_unscaled(const std::string& split) const;

    static DataConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct StrategyConfig {
    TrainStrategy strategy = TrainStrategy::Full;
    double pool_fraction = 0.0;  // key-pool only

    std::string label() const;
};

struct BoundsConfig {
    double epsilon = 1.0;
    double t = 2.0;
    double c = 1.0;
    size_t variance_mc_configs = 0;  // 0 disables the variance MC section
    size_t variance_mc_trials = 10000;
};

// Encodes the end-to-end protocol: pretrain on the source, localize, lock,
// adapt per strategy on the target, refresh keys, evaluate, verify bounds.
struct Manifest {
    std::string name = "experiment";
    uint64_t seed = 1;  // master seed; env ADALOC_SEED overrides
    NetworkSpec network;
    DataConfig source;
    DataConfig target;
    KeySpec key;
    std::vector<StrategyConfig> strategies;
    TrainConfig pretrain;
    TrainConfig adapt;
    BoundsConfig bounds;
    std::string output_dir = "out";

    void validate() const;
    static Manifest from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

Manifest read_manifest(const std::string& path);

struct PipelineResult {
    nlohmann::json report;
    std::string report_path;
};

// Runs every stage, writes all artifacts (with content hashes in the report)
// under manifest.output_dir, and returns the report. A stage failure aborts
// with the stage name in the error; artifacts written so far are kept.
PipelineResult run_pipeline(const Manifest& manifest, std::ostream* log = nullptr);

}  // namespace adaloc
