#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adaloc/network.hpp"
#include "adaloc/tensor.hpp"

namespace adaloc {

struct Sample {
    Tensor input;
    size_t label = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    size_t class_count = 0;
    std::string split;       // "train" / "test"
    std::string provenance;  // generator parameters or file path

    size_t size() const { return samples.size(); }
    size_t input_dim() const { return samples.empty() ? 0 : samples.front().input.size(); }
    void validate() const;
};

// Gaussian clusters around seeded unit-sphere means. Means derive from `seed`
// alone; the sample noise stream also folds in the split tag, so train/test
// splits of one seed share cluster geometry. Inputs are clipped to
// ||x|| <= max_norm.
struct BlobsConfig {
    size_t class_count = 10;
    size_t dim = 32;
    size_t per_class = 500;
    double spread = 0.15;
    double max_norm = 1.0;
    uint64_t seed = 1;
    std::string split = "train";
};
Dataset gen_blobs(const BlobsConfig& cfg);

// Desk-scale 28x28 grayscale stand-in: per-class prototypes built from seeded
// Gaussian bumps, samples = brightness-jittered prototype + pixel noise,
// clipped to [0, 1]. Pairs with the IDX codec below.
struct ImageTaskConfig {
    size_t class_count = 10;
    size_t per_class = 200;
    double noise = 0.15;
    size_t bumps = 3;
    uint64_t seed = 1;
    std::string split = "train";
};
Dataset gen_image_task(const ImageTaskConfig& cfg);

// IDX binary format (big-endian dims, raw ubyte payload). Pixels scale to
// [0, 1] on load. Errors name the missing byte count on truncation.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const Dataset& dataset, const std::string& images_path,
               const std::string& labels_path);

// CSV with a header row; the column named "label" carries the class, the
// remaining columns are numeric features.
Dataset load_csv(const std::string& path);

struct EvalReport {
    double accuracy = 0.0;
    double metric_m = 0.0;  // 1 - accuracy
    std::vector<double> per_class_accuracy;
    size_t sample_count = 0;
};

// Accuracy by argmax (ties to the lowest class index); M = 1 - accuracy.
EvalReport evaluate(const ParameterStore& params, const Dataset& dataset);

size_t argmax_lowest(const double* values, size_t n);

}  // namespace adaloc
