#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "adaloc/data.hpp"
#include "adaloc/network.hpp"
#include "adaloc/tensor.hpp"

namespace adaloc {

// Variance assumptions for a stack of L hidden layers of width N with a
// B_L-Lipschitz activation.
struct VarianceProfile {
    size_t depth = 1;   // L
    size_t width = 1;   // N
    double lipschitz = 1.0;
    std::vector<double> weight_var;  // per layer
    std::vector<double> bias_var;    // per layer

    void validate() const;
};

// Exact evaluation of the three-term output-variance bound:
//   ||x||^2 (B^2 N)^L prod Var(W_i)
//   + B^2 N Var(b_L)
//   + B^2 sum_{i<L} { N Var(b_i) prod_{j>i} [B^2 N Var(W_j)] }
double variance_bound(const VarianceProfile& profile, double x_norm);

enum class WeightLaw { Gaussian, Uniform };

struct McVarianceResult {
    double variance = 0.0;    // sum of per-output-coordinate sample variances
    double std_error = 0.0;   // conservative standard error of that sum
    size_t trials = 0;
};

// Monte-Carlo oracle: sample i.i.d. zero-mean weights/biases with the profile
// variances, evaluate the stack on x, return the summed coordinate variances.
McVarianceResult mc_output_variance(const VarianceProfile& profile, const Tensor& x, size_t trials,
                                    uint64_t seed, WeightLaw law = WeightLaw::Gaussian,
                                    bool relu_activation = true);

struct BoundConstants {
    size_t depth = 1;       // L
    double b_sigma = 1.0;   // activation Lipschitz constant
    double b_theta = 1.0;   // max layer spectral norm
    double b_x = 1.0;       // max input norm
    std::vector<double> k_l;  // per-layer sub-Gaussian norm estimates
    double c = 1.0;         // universal constant, configurable
    double t = 2.0;         // tail parameter
    double epsilon = 1.0;   // output tolerance

    nlohmann::json to_json() const;
};

struct DistanceThreshold {
    double threshold = 0.0;         // eps / (B_sigma^{L-1} B_theta^L B_x) - B_sigma B_theta
    double success_probability = 0.0;  // (1 - 2 exp(-t^2))^L
    double success_probability_std = 0.0;  // (1 - 2 exp(-t^2))^{L+1}
    bool vacuous = false;           // threshold <= 0
};

DistanceThreshold distance_threshold(const BoundConstants& c);

// Largest singular value by power iteration on M^T M; seeded start vector,
// relative tolerance 1e-8. Zero matrix returns 0.
double spectral_norm(const Tensor& matrix, size_t max_iterations, uint64_t seed = 1);

BoundConstants estimate_constants(const ParameterStore& params, const Dataset& dataset, double c,
                                  double t, double epsilon);

struct BoundReport {
    BoundConstants constants;
    double threshold = 0.0;
    double success_probability = 0.0;
    double empirical_distance = 0.0;
    double per_layer_distance_sum = 0.0;
    std::optional<double> slack_ratio;
    bool vacuous = false;
    // empirical_distance <= threshold: the key-only solution sits inside the
    // practical solution set around the fully fine-tuned optimum
    bool within_practical_set = false;

    nlohmann::json to_json() const;
};

BoundReport slack_report(const ParameterStore& theta_tilde, const ParameterStore& theta_hat,
                         const BoundConstants& constants);

struct OrderingReport {
    size_t pair_count = 0;
    size_t respected = 0;
    double fraction = 0.0;
    std::optional<double> spearman;
};

// Ordering check at layer l: for unit pairs (j, k) of layer l-1 ordered by
// incoming l1 norm, compare the summed |dL/dW^(l)[:, j]| against column k on
// one input. Equal gradients count as respecting the ordering.
OrderingReport gradient_ordering_check(const ParameterStore& params, const Tensor& x, size_t layer,
                                       size_t label = 0);

}  // namespace adaloc
