#include "adaloc/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "adaloc/adaptation.hpp"
#include "adaloc/rng.hpp"
#include "adaloc/stats.hpp"

namespace adaloc {

void VarianceProfile::validate() const {
    if (depth == 0 || width == 0) throw ValidationError("variance profile: L, N >= 1");
    if (weight_var.size() != depth || bias_var.size() != depth)
        throw ValidationError("variance profile: need one variance per layer");
    for (double v : weight_var) {
        if (v < 0.0) throw ValidationError("variance profile: negative weight variance");
    }
    for (double v : bias_var) {
        if (v < 0.0) throw ValidationError("variance profile: negative bias variance");
    }
}

double variance_bound(const VarianceProfile& profile, double x_norm) {
    profile.validate();
    const double b2n = profile.lipschitz * profile.lipschitz * double(profile.width);
    const size_t L = profile.depth;

    double term1 = x_norm * x_norm;
    for (size_t i = 0; i < L; ++i) term1 *= b2n * profile.weight_var[i];

    const double term2 = b2n * profile.bias_var[L - 1];

    double term3 = 0.0;
    for (size_t i = 0; i + 1 < L; ++i) {
        double prod = double(profile.width) * profile.bias_var[i];
        for (size_t j = i + 1; j < L; ++j) prod *= b2n * profile.weight_var[j];
        term3 += prod;
    }
    term3 *= profile.lipschitz * profile.lipschitz;

    return term1 + term2 + term3;
}

McVarianceResult mc_output_variance(const VarianceProfile& profile, const Tensor& x, size_t trials,
                                    uint64_t seed, WeightLaw law, bool relu_activation) {
    profile.validate();
    if (trials < 100) throw ContractError("mc_output_variance: trials must be >= 100");
    if (x.size() != profile.width) throw DimensionError("mc_output_variance: input must have width N");

    const size_t N = profile.width;
    const size_t L = profile.depth;
    Rng rng(seed);

    // Uniform on [-a, a] has variance a^2/3.
    auto draw = [&](double variance) -> double {
        if (variance == 0.0) return 0.0;
        if (law == WeightLaw::Gaussian) return rng.normal(0.0, std::sqrt(variance));
        const double a = std::sqrt(3.0 * variance);
        return rng.uniform(-a, a);
    };

    std::vector<std::vector<double>> outputs(N, std::vector<double>(trials));
    std::vector<double> cur(N), next(N);
    for (size_t trial = 0; trial < trials; ++trial) {
        for (size_t i = 0; i < N; ++i) cur[i] = x.data[i];
        for (size_t layer = 0; layer < L; ++layer) {
            const double wv = profile.weight_var[layer];
            const double bv = profile.bias_var[layer];
            for (size_t o = 0; o < N; ++o) {
                double acc = draw(bv);
                for (size_t i = 0; i < N; ++i) acc += draw(wv) * cur[i];
                if (relu_activation && acc < 0.0) acc = 0.0;
                next[o] = acc;
            }
            std::swap(cur, next);
        }
        for (size_t i = 0; i < N; ++i) outputs[i][trial] = cur[i];
    }

    // Sum of per-coordinate sample variances; SE of each variance from the
    // fourth central moment, combined conservatively across coordinates.
    McVarianceResult result;
    result.trials = trials;
    double se2 = 0.0;
    for (size_t i = 0; i < N; ++i) {
        const double m = mean_of(outputs[i]);
        double m2 = 0.0, m4 = 0.0;
        for (double v : outputs[i]) {
            const double dv = v - m;
            m2 += dv * dv;
            m4 += dv * dv * dv * dv;
        }
        m2 /= double(trials);
        m4 /= double(trials);
        result.variance += m2;
        const double var_of_var = (m4 - m2 * m2) / double(trials);
        se2 += std::max(var_of_var, 0.0);
    }
    result.std_error = std::sqrt(se2);
    return result;
}

nlohmann::json BoundConstants::to_json() const {
    return nlohmann::json{{"L", depth},   {"b_sigma", b_sigma}, {"b_theta", b_theta},
                          {"b_x", b_x},   {"k_l", k_l},         {"c", c},
                          {"t", t},       {"epsilon", epsilon}};
}

DistanceThreshold distance_threshold(const BoundConstants& c) {
    if (c.depth == 0) throw ValidationError("distance_threshold: depth must be >= 1");
    if (!(c.b_sigma > 0.0) || !(c.b_theta > 0.0) || !(c.b_x > 0.0))
        throw ValidationError("distance_threshold: constants must be positive");
    DistanceThreshold out;
    const double denom =
        std::pow(c.b_sigma, double(c.depth) - 1.0) * std::pow(c.b_theta, double(c.depth)) * c.b_x;
    out.threshold = c.epsilon / denom - c.b_sigma * c.b_theta;
    const double p = 1.0 - 2.0 * std::exp(-c.t * c.t);
    out.success_probability = std::pow(p, double(c.depth));
    out.success_probability_std = std::pow(p, double(c.depth) + 1.0);
    out.vacuous = !(out.threshold > 0.0);
    return out;
}

double spectral_norm(const Tensor& matrix, size_t max_iterations, uint64_t seed) {
    if (matrix.rank() != 2) throw DimensionError("spectral_norm: need a matrix");
    if (max_iterations == 0) throw ContractError("spectral_norm: iterations must be >= 1");
    const size_t rows = matrix.shape[0], cols = matrix.shape[1];

    double frob = 0.0;
    for (double v : matrix.data) frob += v * v;
    if (frob == 0.0) return 0.0;

    Rng rng(seed);
    std::vector<double> v(cols), mv(rows);
    double norm = 0.0;
    for (double& vi : v) {
        vi = rng.normal();
        norm += vi * vi;
    }
    norm = std::sqrt(norm);
    for (double& vi : v) vi /= norm;

    double sigma = 0.0;
    for (size_t iter = 0; iter < max_iterations; ++iter) {
        for (size_t r = 0; r < rows; ++r) {
            const double* row = &matrix.data[r * cols];
            double acc = 0.0;
            for (size_t c = 0; c < cols; ++c) acc += row[c] * v[c];
            mv[r] = acc;
        }
        double mv_norm = 0.0;
        for (double x : mv) mv_norm += x * x;
        mv_norm = std::sqrt(mv_norm);
        if (mv_norm == 0.0) return 0.0;

        // v <- M^T (M v), renormalized
        std::fill(v.begin(), v.end(), 0.0);
        for (size_t r = 0; r < rows; ++r) {
            const double* row = &matrix.data[r * cols];
            const double m = mv[r];
            for (size_t c = 0; c < cols; ++c) v[c] += row[c] * m;
        }
        double vnorm = 0.0;
        for (double x : v) vnorm += x * x;
        vnorm = std::sqrt(vnorm);
        if (vnorm == 0.0) return 0.0;
        for (double& x : v) x /= vnorm;

        const double prev = sigma;
        sigma = mv_norm;
        if (iter > 0 && std::fabs(sigma - prev) <= 1e-8 * std::max(sigma, 1e-300)) break;
    }
    return sigma;
}

BoundConstants estimate_constants(const ParameterStore& params, const Dataset& dataset, double c,
                                  double t, double epsilon) {
    dataset.validate();
    BoundConstants out;
    out.depth = params.spec.layers.size();
    out.b_sigma = 1.0;  // ReLU
    out.c = c;
    out.t = t;
    out.epsilon = epsilon;

    double bx = 0.0;
    for (const Sample& s : dataset.samples) bx = std::max(bx, l2_norm(s.input));
    out.b_x = bx;

    const double sqrt_ln2 = std::sqrt(std::log(2.0));
    double btheta = 0.0;
    for (size_t li = 0; li < params.spec.layers.size(); ++li) {
        const LayerSpec& l = params.spec.layers[li];
        Tensor m = params.weights[li];
        if (l.kind == LayerSpec::Kind::Conv) {
            m.shape = {l.c_out, l.c_in * l.k * l.k};  // unfolded kernel matrix
        }
        btheta = std::max(btheta, spectral_norm(m, 10000, 1));
        // Sub-Gaussian norm proxy: sample std / sqrt(ln 2); exact for Gaussians.
        const double std_dev = std::sqrt(variance_of(params.weights[li].data));
        out.k_l.push_back(std_dev / sqrt_ln2);
    }
    out.b_theta = btheta;
    return out;
}

nlohmann::json BoundReport::to_json() const {
    nlohmann::json j;
    j["constants"] = constants.to_json();
    j["threshold"] = threshold;
    j["success_probability"] = success_probability;
    j["empirical_distance"] = empirical_distance;
    j["per_layer_distance_sum"] = per_layer_distance_sum;
    j["vacuous"] = vacuous;
    j["within_practical_set"] = within_practical_set;
    if (slack_ratio) j["slack_ratio"] = *slack_ratio;
    else j["slack_ratio"] = nullptr;
    return j;
}

BoundReport slack_report(const ParameterStore& theta_tilde, const ParameterStore& theta_hat,
                         const BoundConstants& constants) {
    if (!(theta_tilde.spec == theta_hat.spec)) throw DimensionError("slack_report: specs differ");
    BoundReport report;
    report.constants = constants;
    const DistanceThreshold dt = distance_threshold(constants);
    report.threshold = dt.threshold;
    report.success_probability = dt.success_probability;
    report.vacuous = dt.vacuous;
    report.empirical_distance = param_distance(theta_tilde, theta_hat, {});

    double per_layer = 0.0;
    for (size_t li = 0; li < theta_tilde.spec.layers.size(); ++li) {
        double acc = 0.0;
        for (size_t i = 0; i < theta_tilde.weights[li].size(); ++i) {
            const double d = theta_tilde.weights[li].data[i] - theta_hat.weights[li].data[i];
            acc += d * d;
        }
        for (size_t i = 0; i < theta_tilde.biases[li].size(); ++i) {
            const double d = theta_tilde.biases[li].data[i] - theta_hat.biases[li].data[i];
            acc += d * d;
        }
        per_layer += std::sqrt(acc);
    }
    report.per_layer_distance_sum = per_layer;

    if (!dt.vacuous) {
        report.slack_ratio = report.empirical_distance / dt.threshold;
        report.within_practical_set = report.empirical_distance <= dt.threshold;
    }
    return report;
}

OrderingReport gradient_ordering_check(const ParameterStore& params, const Tensor& x, size_t layer,
                                       size_t label) {
    if (layer == 0 || layer >= params.spec.layers.size())
        throw IndexError("gradient_ordering_check: layer must have a predecessor");
    const LayerSpec& prev = params.spec.layers[layer - 1];
    if (prev.unit_count() < 2) throw ContractError("gradient_ordering_check: need >= 2 units");

    const std::vector<double> norms = unit_l1_norms(params, layer - 1);

    Tape tape;
    const TapedForward tf = forward_on_tape(tape, params, x);
    const int loss = tape.softmax_cross_entropy(tf.logits, label);
    tape.backward(loss);
    const Tensor& grad = tape.gradient(tf.weight_leaves[layer]);

    // Summed |gradient| per column of layer `layer`, one column per unit of
    // layer-1 (conv: one block of k*k columns per input channel).
    const LayerSpec& cur = params.spec.layers[layer];
    const size_t units = prev.unit_count();
    std::vector<double> column_grad(units, 0.0);
    if (cur.kind == LayerSpec::Kind::Dense) {
        size_t cols_per_unit = 1;
        size_t total_cols = cur.in;
        if (prev.kind == LayerSpec::Kind::Conv) cols_per_unit = total_cols / units;
        for (size_t r = 0; r < cur.out; ++r) {
            for (size_t u = 0; u < units; ++u) {
                for (size_t cc = 0; cc < cols_per_unit; ++cc) {
                    column_grad[u] += std::fabs(grad.data[r * total_cols + u * cols_per_unit + cc]);
                }
            }
        }
    } else {
        const size_t kk = cur.k * cur.k;
        for (size_t r = 0; r < cur.c_out; ++r) {
            for (size_t u = 0; u < units; ++u) {
                for (size_t cc = 0; cc < kk; ++cc) {
                    column_grad[u] += std::fabs(grad.data[(r * cur.c_in + u) * kk + cc]);
                }
            }
        }
    }

    OrderingReport report;
    constexpr double kTie = 1e-12;
    for (size_t j = 0; j < units; ++j) {
        for (size_t k = 0; k < units; ++k) {
            if (j == k) continue;
            if (norms[j] <= norms[k]) {
                report.pair_count += 1;
                if (column_grad[j] <= column_grad[k] + kTie) report.respected += 1;
            }
        }
    }
    report.fraction = report.pair_count ? double(report.respected) / double(report.pair_count) : 0.0;
    bool any = false;
    for (double g : column_grad) {
        if (g != 0.0) any = true;
    }
    report.spearman = any ? spearman_rank(norms, column_grad) : std::nullopt;
    return report;
}

}  // namespace adaloc
