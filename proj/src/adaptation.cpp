#include "adaloc/adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "adaloc/model_io.hpp"
#include "adaloc/rng.hpp"
#include "adaloc/stats.hpp"

namespace adaloc {

std::string train_strategy_name(TrainStrategy s) {
    switch (s) {
        case TrainStrategy::Full: return "full";
        case TrainStrategy::KeyTop: return "key-top";
        case TrainStrategy::KeyPool: return "key-pool";
        case TrainStrategy::KeyRandom: return "key-random";
        case TrainStrategy::KeyBottom: return "key-bottom";
    }
    throw ValidationError("unknown train strategy");
}

TrainStrategy train_strategy_from_name(const std::string& name) {
    if (name == "full") return TrainStrategy::Full;
    if (name == "key-top") return TrainStrategy::KeyTop;
    if (name == "key-pool") return TrainStrategy::KeyPool;
    if (name == "key-random") return TrainStrategy::KeyRandom;
    if (name == "key-bottom") return TrainStrategy::KeyBottom;
    throw ValidationError("unknown train strategy: " + name);
}

bool is_key_strategy(TrainStrategy s) { return s != TrainStrategy::Full; }

void TrainConfig::validate() const {
    if (!(eta > 0.0)) throw ValidationError("train config: eta must be positive");
    if (batch_size == 0) throw ValidationError("train config: batch_size must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0) throw ValidationError("train config: momentum in [0, 1)");
}

UpdateMask UpdateMask::all(size_t d) {
    UpdateMask m;
    m.allowed.assign(d, 1);
    return m;
}

UpdateMask UpdateMask::none(size_t d) {
    UpdateMask m;
    m.allowed.assign(d, 0);
    return m;
}

UpdateMask UpdateMask::from_key(const NetworkSpec& spec, const Key& key) {
    UpdateMask m = none(spec.param_count());
    for (const KeyEntry& e : key.entries) {
        if (e.index >= m.allowed.size()) throw ValidationError("mask: key index out of range");
        m.allowed[e.index] = 1;
    }
    return m;
}

size_t UpdateMask::count() const {
    size_t n = 0;
    for (uint8_t v : allowed) n += v;
    return n;
}

namespace {

struct StepStats {
    double loss_sum = 0.0;
    size_t correct = 0;
    size_t count = 0;
};

// Shared mini-batch engine. Handles batched dense tapes, per-sample conv
// tapes, masked updates, optional momentum, the sparsify prox, and per-unit
// |update| accumulation for the gradient profile.
class Trainer {
  public:
    Trainer(ParameterStore params, const UpdateMask& mask, const TrainConfig& config)
        : params_(std::move(params)), mask_(mask), config_(config) {
        const size_t L = params_.spec.layers.size();
        dense_only_ = params_.spec.input_shape[0] == 0;
        offsets_ = params_.layer_offsets();
        if (config_.momentum > 0.0) {
            vel_w_.resize(L);
            vel_b_.resize(L);
            for (size_t li = 0; li < L; ++li) {
                vel_w_[li] = Tensor(params_.weights[li].shape);
                vel_b_[li] = Tensor(params_.biases[li].shape);
            }
        }
    }

    void enable_accumulation() {
        accum_.clear();
        for (const Tensor& w : params_.weights) accum_.push_back(Tensor(w.shape));
        accumulate_ = true;
    }

    const std::vector<Tensor>& accumulated() const { return accum_; }
    const ParameterStore& params() const { return params_; }
    ParameterStore take_params() { return std::move(params_); }

    StepStats step(const Dataset& data, const std::vector<size_t>& batch_ids, double eta,
                   double lambda, double floor) {
        StepStats stats;
        const size_t n = batch_ids.size();
        const size_t L = params_.spec.layers.size();
        tape_.reset();

        std::vector<const Tensor*> grads_w(L, nullptr);
        std::vector<const Tensor*> grads_b(L, nullptr);
        std::vector<Tensor> acc_w, acc_b;

        if (dense_only_) {
            const size_t dim = params_.spec.input_dim;
            Tensor X({n, dim});
            std::vector<size_t> labels(n);
            for (size_t r = 0; r < n; ++r) {
                const Sample& s = data.samples[batch_ids[r]];
                if (s.input.size() != dim) throw DimensionError("train: input size mismatch");
                std::copy(s.input.data.begin(), s.input.data.end(), X.data.begin() + long(r * dim));
                labels[r] = s.label;
            }
            const TapedForward tf = forward_on_tape(tape_, params_, X);
            const Tensor& logits = tape_.value(tf.logits);
            const size_t k = params_.spec.class_count;
            for (size_t r = 0; r < n; ++r) {
                if (argmax_lowest(&logits.data[r * k], k) == labels[r]) ++stats.correct;
            }
            const int loss = tape_.softmax_cross_entropy_batch(tf.logits, labels);
            stats.loss_sum = tape_.value(loss).data[0] * double(n);
            stats.count = n;
            tape_.backward(loss);
            for (size_t li = 0; li < L; ++li) {
                grads_w[li] = &tape_.gradient(tf.weight_leaves[li]);
                grads_b[li] = &tape_.gradient(tf.bias_leaves[li]);
            }
        } else {
            acc_w.reserve(L);
            acc_b.reserve(L);
            for (size_t li = 0; li < L; ++li) {
                acc_w.push_back(Tensor(params_.weights[li].shape));
                acc_b.push_back(Tensor(params_.biases[li].shape));
            }
            for (size_t r = 0; r < n; ++r) {
                const Sample& s = data.samples[batch_ids[r]];
                Tensor x = s.input;
                if (x.rank() == 1) {
                    x.shape = {params_.spec.input_shape[0], params_.spec.input_shape[1],
                               params_.spec.input_shape[2]};
                }
                tape_.reset();
                const TapedForward tf = forward_on_tape(tape_, params_, x);
                const Tensor& logits = tape_.value(tf.logits);
                if (argmax_lowest(logits.data.data(), logits.size()) == s.label) ++stats.correct;
                const int loss = tape_.softmax_cross_entropy(tf.logits, s.label);
                stats.loss_sum += tape_.value(loss).data[0];
                tape_.backward(loss);
                for (size_t li = 0; li < L; ++li) {
                    const Tensor& gw = tape_.gradient(tf.weight_leaves[li]);
                    for (size_t i = 0; i < gw.size(); ++i) acc_w[li].data[i] += gw.data[i];
                    const Tensor& gb = tape_.gradient(tf.bias_leaves[li]);
                    for (size_t i = 0; i < gb.size(); ++i) acc_b[li].data[i] += gb.data[i];
                }
            }
            const double inv = 1.0 / double(n);
            for (size_t li = 0; li < L; ++li) {
                for (double& v : acc_w[li].data) v *= inv;
                for (double& v : acc_b[li].data) v *= inv;
                grads_w[li] = &acc_w[li];
                grads_b[li] = &acc_b[li];
            }
            stats.count = n;
        }

        apply_update(grads_w, grads_b, eta);
        if (lambda > 0.0) apply_group_prox(eta, lambda, floor);
        return stats;
    }

    // Magnitude rank-prune: keep the top `keep` units per hidden layer.
    void rank_prune(size_t keep) {
        const size_t L = params_.spec.layers.size();
        for (size_t li = 0; li + 1 < L; ++li) {
            const std::vector<double> norms = unit_l1_norms(params_, li);
            if (norms.size() <= keep) continue;
            std::vector<size_t> order(norms.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::stable_sort(order.begin(), order.end(),
                             [&](size_t a, size_t b) { return norms[a] > norms[b]; });
            const size_t per_unit = params_.spec.layers[li].weights_per_unit();
            for (size_t r = keep; r < order.size(); ++r) {
                const size_t u = order[r];
                double* row = &params_.weights[li].data[u * per_unit];
                std::fill(row, row + per_unit, 0.0);
                params_.biases[li].data[u] = 0.0;
            }
        }
    }

  private:
    void apply_update(const std::vector<const Tensor*>& grads_w,
                      const std::vector<const Tensor*>& grads_b, double eta) {
        const size_t L = params_.spec.layers.size();
        const bool use_momentum = config_.momentum > 0.0;
        for (size_t li = 0; li < L; ++li) {
            const size_t base = offsets_[li];
            const size_t wcount = params_.weights[li].size();
            double* w = params_.weights[li].data.data();
            const double* gw = grads_w[li]->data.data();
            for (size_t i = 0; i < wcount; ++i) {
                if (!mask_.allowed[base + i]) continue;
                double g = gw[i];
                if (use_momentum) {
                    double& v = vel_w_[li].data[i];
                    v = config_.momentum * v + g;
                    g = v;
                }
                const double delta = eta * g;
                if (!std::isfinite(delta)) throw NumericError("train: non-finite weight update");
                w[i] -= delta;
                if (accumulate_) accum_[li].data[i] += std::fabs(delta);
            }
            const size_t bbase = base + wcount;
            double* b = params_.biases[li].data.data();
            const double* gb = grads_b[li]->data.data();
            for (size_t i = 0; i < params_.biases[li].size(); ++i) {
                if (!mask_.allowed[bbase + i]) continue;
                double g = gb[i];
                if (use_momentum) {
                    double& v = vel_b_[li].data[i];
                    v = config_.momentum * v + g;
                    g = v;
                }
                const double delta = eta * g;
                if (!std::isfinite(delta)) throw NumericError("train: non-finite bias update");
                b[i] -= delta;
            }
        }
    }

    // Floored proximal step of the group penalty lambda * sum_u ||(W_u, b_u)||.
    void apply_group_prox(double eta, double lambda, double floor) {
        const size_t L = params_.spec.layers.size();
        for (size_t li = 0; li + 1 < L; ++li) {
            const size_t per_unit = params_.spec.layers[li].weights_per_unit();
            const size_t units = params_.spec.layers[li].unit_count();
            for (size_t u = 0; u < units; ++u) {
                double* row = &params_.weights[li].data[u * per_unit];
                double& bias = params_.biases[li].data[u];
                double norm = bias * bias;
                for (size_t i = 0; i < per_unit; ++i) norm += row[i] * row[i];
                norm = std::sqrt(norm);
                if (norm == 0.0) continue;
                const double target = std::max(norm - eta * lambda, std::min(norm, floor));
                const double scale = target / norm;
                if (scale == 1.0) continue;
                for (size_t i = 0; i < per_unit; ++i) row[i] *= scale;
                bias *= scale;
            }
        }
    }

    ParameterStore params_;
    const UpdateMask& mask_;
    const TrainConfig& config_;
    Tape tape_;
    std::vector<size_t> offsets_;
    std::vector<Tensor> vel_w_, vel_b_;
    std::vector<Tensor> accum_;
    bool accumulate_ = false;
    bool dense_only_ = true;
};

struct EpochPlan {
    double lambda = 0.0;
};

std::vector<EpochPlan> build_epoch_plan(const TrainConfig& config) {
    std::vector<EpochPlan> plan;
    if (config.sparsify) {
        for (const SparsifyPhase& phase : config.sparsify->phases) {
            for (size_t e = 0; e < phase.epochs; ++e) plan.push_back({phase.lambda});
        }
    } else {
        plan.assign(config.epochs, {0.0});
    }
    return plan;
}

double dataset_loss(const ParameterStore& params, const Dataset& data) {
    double total = 0.0;
    for (const Sample& s : data.samples) {
        Tensor x = s.input;
        if (params.spec.input_shape[0] > 0 && x.rank() == 1) {
            x.shape = {params.spec.input_shape[0], params.spec.input_shape[1],
                       params.spec.input_shape[2]};
        }
        const Tensor logits = forward(params, x);
        double max = logits.data[0];
        for (double v : logits.data) max = std::max(max, v);
        double sum = 0.0;
        for (double v : logits.data) sum += std::exp(v - max);
        total += -(logits.data[s.label] - max - std::log(sum));
    }
    return total / double(data.size());
}

FinetuneResult run_training(const ParameterStore& params, const Dataset& train_data,
                            const Dataset* eval_data, const TrainConfig& config, const Key* key,
                            std::vector<Tensor>* accum_out) {
    config.validate();
    train_data.validate();
    if (is_key_strategy(config.strategy) && key == nullptr)
        throw ContractError("finetune: key strategies require a key");
    if (!is_key_strategy(config.strategy) && key != nullptr)
        throw ContractError("finetune: full fine-tuning takes no key");

    const size_t d = params.dim();
    const UpdateMask mask = key ? UpdateMask::from_key(params.spec, *key) : UpdateMask::all(d);

    Trainer trainer(params, mask, config);
    if (accum_out != nullptr) trainer.enable_accumulation();

    FinetuneResult result;
    std::vector<EpochPlan> plan = build_epoch_plan(config);
    const size_t clean_epochs = config.sparsify ? config.sparsify->clean_epochs : 0;

    Rng shuffle_rng(config.seed);
    std::vector<size_t> order(train_data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    size_t epoch_no = 0;
    auto run_epochs = [&](size_t count, const EpochPlan* plan_entries) {
        for (size_t e = 0; e < count; ++e, ++epoch_no) {
            const double lambda = plan_entries ? plan_entries[e].lambda : 0.0;
            shuffle_rng.shuffle(order);
            StepStats epoch_stats;
            std::vector<size_t> batch;
            for (size_t start = 0; start < order.size(); start += config.batch_size) {
                const size_t n = std::min(config.batch_size, order.size() - start);
                batch.assign(order.begin() + long(start), order.begin() + long(start + n));
                const StepStats s = trainer.step(train_data, batch, config.eta, lambda,
                                                 config.sparsify ? config.sparsify->unit_floor : 0.0);
                epoch_stats.loss_sum += s.loss_sum;
                epoch_stats.correct += s.correct;
                epoch_stats.count += s.count;
            }
            result.metrics.push_back({epoch_no, "train", epoch_stats.loss_sum / double(epoch_stats.count),
                                      double(epoch_stats.correct) / double(epoch_stats.count)});
            if (eval_data != nullptr) {
                const EvalReport er = evaluate(trainer.params(), *eval_data);
                result.metrics.push_back(
                    {epoch_no, "test", dataset_loss(trainer.params(), *eval_data), er.accuracy});
            }
        }
    };

    run_epochs(plan.size(), plan.data());
    if (config.sparsify && config.sparsify->keep_units > 0) trainer.rank_prune(config.sparsify->keep_units);
    run_epochs(clean_epochs, nullptr);

    if (accum_out != nullptr) *accum_out = trainer.accumulated();
    result.params = trainer.take_params();
    result.params.tag =
        config.strategy == TrainStrategy::Full ? ModelTag::FullFinetuned : ModelTag::KeyFinetuned;
    if (config.sparsify) result.params.tag = ModelTag::Pretrained;
    return result;
}

}  // namespace

ParameterStore masked_sgd_step(const ParameterStore& params, const std::vector<Sample>& batch,
                               const UpdateMask& mask, double eta) {
    if (batch.empty()) throw ContractError("masked_sgd_step: batch must be nonempty");
    if (mask.allowed.size() != params.dim()) throw ValidationError("masked_sgd_step: mask size mismatch");
    TrainConfig cfg;
    cfg.eta = eta;
    cfg.epochs = 1;
    cfg.batch_size = batch.size();
    Trainer trainer(params, mask, cfg);
    Dataset scratch;
    scratch.samples = batch;
    scratch.class_count = params.spec.class_count;
    scratch.split = "step";
    std::vector<size_t> ids(batch.size());
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    trainer.step(scratch, ids, eta, 0.0, 0.0);
    ParameterStore out = trainer.take_params();
    out.tag = params.tag;
    return out;
}

FinetuneResult finetune(const ParameterStore& params, const Dataset& train_data,
                        const Dataset* eval_data, const TrainConfig& config, const Key* key) {
    return run_training(params, train_data, eval_data, config, key, nullptr);
}

namespace {

GradProfile profile_from_accum(const ParameterStore& params, const std::vector<Tensor>& accum) {
    GradProfile profile;
    for (size_t li = 0; li < params.spec.layers.size(); ++li) {
        const std::vector<double> norms = unit_l1_norms(params, li);
        const size_t per_unit = params.spec.layers[li].weights_per_unit();
        std::vector<double> updates(norms.size(), 0.0);
        for (size_t u = 0; u < norms.size(); ++u) {
            const double* row = &accum[li].data[u * per_unit];
            double acc = 0.0;
            for (size_t i = 0; i < per_unit; ++i) acc += row[i];
            updates[u] = acc;
            profile.units.push_back({li, u, norms[u], acc});
        }
        bool all_zero = true;
        for (double v : updates) {
            if (v != 0.0) all_zero = false;
        }
        profile.per_layer_spearman.push_back(all_zero ? std::nullopt : spearman_rank(norms, updates));
    }
    return profile;
}

}  // namespace

FinetuneResult finetune_profiled(const ParameterStore& params, const Dataset& train_data,
                                 const Dataset* eval_data, const TrainConfig& config,
                                 const Key* key, GradProfile* profile) {
    std::vector<Tensor> accum;
    FinetuneResult result = run_training(params, train_data, eval_data, config, key, &accum);
    if (profile != nullptr) *profile = profile_from_accum(params, accum);
    return result;
}

double param_distance(const ParameterStore& a, const ParameterStore& b,
                      const std::vector<size_t>& exclude) {
    if (!(a.spec == b.spec)) throw DimensionError("param_distance: specs differ");
    const std::vector<double> fa = a.flatten();
    const std::vector<double> fb = b.flatten();
    std::vector<uint8_t> skip(fa.size(), 0);
    for (size_t idx : exclude) {
        if (idx >= skip.size()) throw IndexError("param_distance: exclude index out of range");
        skip[idx] = 1;
    }
    double acc = 0.0;
    for (size_t i = 0; i < fa.size(); ++i) {
        if (skip[i]) continue;
        const double dla = fa[i] - fb[i];
        acc += dla * dla;
    }
    return std::sqrt(acc);
}

GradProfile grad_accumulation_profile(const ParameterStore& params, const Dataset& train_data,
                                      const TrainConfig& config, const Key* key) {
    if (config.epochs == 0 && !config.sparsify)
        throw ContractError("grad_accumulation_profile: needs at least one epoch");
    GradProfile profile;
    finetune_profiled(params, train_data, nullptr, config, key, &profile);
    return profile;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetric>& metrics) {
    std::ostringstream out;
    out << "epoch,split,loss,accuracy\n";
    out.precision(17);
    for (const EpochMetric& m : metrics) {
        out << m.epoch << ',' << m.split << ',' << m.loss << ',' << m.accuracy << '\n';
    }
    atomic_write_file(path, out.str());
}

}  // namespace adaloc
