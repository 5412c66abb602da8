#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "adaloc/adaptation.hpp"
#include "adaloc/bounds.hpp"
#include "adaloc/data.hpp"
#include "adaloc/keying.hpp"
#include "adaloc/locking.hpp"
#include "adaloc/model_io.hpp"
#include "adaloc/pipeline.hpp"
#include "adaloc/rng.hpp"

namespace {

using namespace adaloc;

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad JSON in " + path + ": " + e.what());
    }
}

Dataset load_dataset(const std::string& config_path, const std::string& split) {
    return DataConfig::from_json(load_json(config_path)).load(split);
}

LockedModel locked_from_file(const std::string& path) {
    ModelFile mf = read_model(path);
    if (mf.store.tag != ModelTag::Locked || !mf.aux.contains("fingerprint"))
        throw ValidationError("not a locked model file: " + path);
    LockedModel locked;
    locked.params = std::move(mf.store);
    locked.fingerprint = hash_from_hex(mf.aux.at("fingerprint").get<std::string>());
    locked.source_hash = hash_from_hex(mf.aux.at("source_hash").get<std::string>());
    locked.key_indices_hash = hash_from_hex(mf.aux.at("key_indices_hash").get<std::string>());
    return locked;
}

nlohmann::json eval_json(const EvalReport& er) {
    return nlohmann::json{{"accuracy", er.accuracy},
                          {"metric_m", er.metric_m},
                          {"per_class_accuracy", er.per_class_accuracy},
                          {"sample_count", er.sample_count}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaloc: key-based model usage control toolkit"};
    app.require_subcommand(1);

    // init-model
    auto* cmd_init = app.add_subcommand("init-model", "Initialize a model from a network spec");
    std::string init_spec, init_out;
    uint64_t init_seed = 1;
    cmd_init->add_option("--spec", init_spec, "network spec JSON file")->required();
    cmd_init->add_option("--seed", init_seed, "init seed");
    cmd_init->add_option("--out", init_out, "output .adlm path")->required();

    // train / adapt share options
    struct TrainArgs {
        std::string model, data, key, out, curves, config, strategy = "full";
        double eta = 0.1;
        size_t epochs = 10, batch = 32;
        uint64_t seed = 0;
    };
    auto add_train_options = [](CLI::App* cmd, TrainArgs& args, bool adapt) {
        cmd->add_option("--model", args.model, "input .adlm")->required();
        cmd->add_option("--data", args.data, "dataset config JSON")->required();
        cmd->add_option("--out", args.out, "output .adlm")->required();
        cmd->add_option("--curves", args.curves, "per-epoch metrics CSV path");
        cmd->add_option("--config", args.config, "full TrainConfig JSON (overrides flags)");
        cmd->add_option("--eta", args.eta, "learning rate");
        cmd->add_option("--epochs", args.epochs, "epochs");
        cmd->add_option("--batch-size", args.batch, "batch size");
        cmd->add_option("--seed", args.seed, "shuffle seed");
        if (adapt) {
            cmd->add_option("--key", args.key, "key file for key-* strategies");
            cmd->add_option("--strategy", args.strategy, "full|key-top|key-pool|key-random|key-bottom");
        }
    };
    auto* cmd_train = app.add_subcommand("train", "Train a model on a dataset (full SGD)");
    TrainArgs train_args;
    add_train_options(cmd_train, train_args, false);
    auto* cmd_adapt = app.add_subcommand("adapt", "Fine-tune fully or through a key");
    TrainArgs adapt_args;
    add_train_options(cmd_adapt, adapt_args, true);

    // localize
    auto* cmd_localize = app.add_subcommand("localize", "Select a key from a model");
    std::string loc_model, loc_out, loc_strategy = "top";
    double loc_rho = 0.05, loc_pool = 0.05;
    uint64_t loc_seed = 0;
    cmd_localize->add_option("--model", loc_model)->required();
    cmd_localize->add_option("--rho", loc_rho, "unit fraction per layer (default 0.05)");
    cmd_localize->add_option("--strategy", loc_strategy, "top|pool-sample|random|bottom");
    cmd_localize->add_option("--pool-fraction", loc_pool, "pool fraction for pool-sample");
    cmd_localize->add_option("--seed", loc_seed, "sampling seed");
    cmd_localize->add_option("--out", loc_out, "output .adak")->required();

    // lock / unlock
    auto* cmd_lock = app.add_subcommand("lock", "Zeroize key coordinates");
    std::string lock_model, lock_key, lock_out;
    cmd_lock->add_option("--model", lock_model)->required();
    cmd_lock->add_option("--key", lock_key)->required();
    cmd_lock->add_option("--out", lock_out)->required();

    auto* cmd_unlock = app.add_subcommand("unlock", "Restore key coordinates");
    std::string unlock_model, unlock_key, unlock_out;
    cmd_unlock->add_option("--locked", unlock_model)->required();
    cmd_unlock->add_option("--key", unlock_key)->required();
    cmd_unlock->add_option("--out", unlock_out)->required();

    // eval
    auto* cmd_eval = app.add_subcommand("eval", "Evaluate accuracy on a dataset");
    std::string eval_model, eval_data, eval_split = "test";
    cmd_eval->add_option("--model", eval_model)->required();
    cmd_eval->add_option("--data", eval_data)->required();
    cmd_eval->add_option("--split", eval_split, "train|test");

    // refresh-key
    auto* cmd_refresh = app.add_subcommand("refresh-key", "Re-read key values from an adapted model");
    std::string refresh_model, refresh_key_path, refresh_out;
    cmd_refresh->add_option("--adapted", refresh_model)->required();
    cmd_refresh->add_option("--key", refresh_key_path)->required();
    cmd_refresh->add_option("--out", refresh_out)->required();

    // bounds
    auto* cmd_bounds = app.add_subcommand("bounds", "Bound machinery");
    auto* cmd_variance_mc = cmd_bounds->add_subcommand("variance-mc", "Monte-Carlo check of the variance bound");
    size_t variance_mc_trials = 10000, variance_mc_configs = 50;
    uint64_t variance_mc_seed = 99;
    cmd_variance_mc->add_option("--trials", variance_mc_trials);
    cmd_variance_mc->add_option("--configs", variance_mc_configs);
    cmd_variance_mc->add_option("--seed", variance_mc_seed);
    auto* cmd_dist = cmd_bounds->add_subcommand("distance", "Distance threshold and probabilities");
    double d_eps = 1.0, d_bs = 1.0, d_bt = 0.9, d_bx = 1.0, d_t = 2.0;
    size_t d_depth = 3;
    cmd_dist->add_option("--epsilon", d_eps);
    cmd_dist->add_option("--b-sigma", d_bs);
    cmd_dist->add_option("--b-theta", d_bt);
    cmd_dist->add_option("--b-x", d_bx);
    cmd_dist->add_option("--t", d_t);
    cmd_dist->add_option("--depth", d_depth);
    auto* cmd_slack = cmd_bounds->add_subcommand("slack", "Slack-ratio report for two models");
    std::string slack_a, slack_b, slack_data;
    double s_eps = 1.0, s_t = 2.0, s_c = 1.0;
    cmd_slack->add_option("--model-tilde", slack_a, "key-only fine-tuned model")->required();
    cmd_slack->add_option("--model-hat", slack_b, "fully fine-tuned model")->required();
    cmd_slack->add_option("--data", slack_data, "dataset config JSON for constants")->required();
    cmd_slack->add_option("--epsilon", s_eps);
    cmd_slack->add_option("--t", s_t);
    cmd_slack->add_option("--c", s_c);
    cmd_bounds->require_subcommand(1);

    // gen-data
    auto* cmd_gen = app.add_subcommand("gen-data", "Materialize a generator dataset as IDX files");
    std::string gen_config, gen_split = "train", gen_images, gen_labels;
    cmd_gen->add_option("--config", gen_config)->required();
    cmd_gen->add_option("--split", gen_split);
    cmd_gen->add_option("--out-images", gen_images)->required();
    cmd_gen->add_option("--out-labels", gen_labels)->required();

    // pipeline
    auto* cmd_pipeline = app.add_subcommand("pipeline", "Run the full experiment protocol");
    std::string pipeline_manifest;
    cmd_pipeline->add_option("--manifest", pipeline_manifest)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_init) {
            const NetworkSpec spec = NetworkSpec::from_json(load_json(init_spec));
            write_model(init_out, init_network(spec, init_seed));
            std::cout << "wrote " << init_out << "\n";
        } else if (*cmd_train || *cmd_adapt) {
            const TrainArgs& a = *cmd_train ? train_args : adapt_args;
            ModelFile mf = read_model(a.model);
            const Dataset data = load_dataset(a.data, "train");
            TrainConfig cfg;
            if (!a.config.empty()) {
                const nlohmann::json cj = load_json(a.config);
                cfg.eta = cj.value("eta", a.eta);
                cfg.epochs = cj.value("epochs", a.epochs);
                cfg.batch_size = cj.value("batch_size", a.batch);
                cfg.seed = cj.value("seed", a.seed);
                cfg.momentum = cj.value("momentum", 0.0);
                if (cj.contains("sparsify")) {
                    SparsifyConfig sp;
                    for (const auto& pj : cj.at("sparsify").at("phases"))
                        sp.phases.push_back({pj.at("epochs").get<size_t>(), pj.at("lambda").get<double>()});
                    sp.unit_floor = cj.at("sparsify").value("unit_floor", 0.0);
                    sp.keep_units = cj.at("sparsify").value("keep_units", size_t(0));
                    sp.clean_epochs = cj.at("sparsify").value("clean_epochs", size_t(0));
                    cfg.sparsify = sp;
                }
            } else {
                cfg.eta = a.eta;
                cfg.epochs = a.epochs;
                cfg.batch_size = a.batch;
                cfg.seed = a.seed;
            }
            cfg.strategy = train_strategy_from_name(*cmd_adapt ? a.strategy : "full");
            Key key;
            const Key* key_ptr = nullptr;
            if (is_key_strategy(cfg.strategy)) {
                if (a.key.empty()) throw ValidationError("key strategies require --key");
                key = read_key(a.key);
                key_ptr = &key;
            }
            const FinetuneResult result = finetune(mf.store, data, nullptr, cfg, key_ptr);
            write_model(a.out, result.params);
            if (!a.curves.empty()) write_metrics_csv(a.curves, result.metrics);
            std::cout << "wrote " << a.out << "\n";
        } else if (*cmd_localize) {
            ModelFile mf = read_model(loc_model);
            KeySpec ks;
            ks.rho = loc_rho;
            ks.pool_fraction = std::max(loc_pool, loc_rho);
            ks.strategy = strategy_from_name(loc_strategy);
            ks.seed = loc_seed;
            Key key;
            switch (ks.strategy) {
                case KeyStrategy::Top: ks.pool_fraction = ks.rho; key = localize_key(mf.store, ks); break;
                case KeyStrategy::PoolSample: key = sample_key_pool(mf.store, ks); break;
                default: ks.pool_fraction = ks.rho; key = baseline_key(mf.store, ks); break;
            }
            write_key(loc_out, key);
            std::cout << "wrote " << loc_out << " (" << key.entries.size() << " entries)\n";
        } else if (*cmd_lock) {
            ModelFile mf = read_model(lock_model);
            const Key key = read_key(lock_key);
            const LockedModel locked = lock(mf.store, key);
            write_model(lock_out, locked.params,
                        nlohmann::json{{"fingerprint", hash_to_hex(locked.fingerprint)},
                                       {"source_hash", hash_to_hex(locked.source_hash)},
                                       {"key_indices_hash", hash_to_hex(locked.key_indices_hash)}});
            std::cout << "wrote " << lock_out << "\n";
        } else if (*cmd_unlock) {
            const LockedModel locked = locked_from_file(unlock_model);
            const Key key = read_key(unlock_key);
            write_model(unlock_out, unlock(locked, key));
            std::cout << "wrote " << unlock_out << "\n";
        } else if (*cmd_eval) {
            ModelFile mf = read_model(eval_model);
            const Dataset data = load_dataset(eval_data, eval_split);
            std::cout << eval_json(evaluate(mf.store, data)).dump(2) << "\n";
        } else if (*cmd_refresh) {
            ModelFile mf = read_model(refresh_model);
            const Key old_key = read_key(refresh_key_path);
            write_key(refresh_out, refresh_key(mf.store, old_key));
            std::cout << "wrote " << refresh_out << "\n";
        } else if (*cmd_variance_mc) {
            Rng rng(variance_mc_seed);
            size_t violations = 0;
            nlohmann::json rows = nlohmann::json::array();
            for (size_t i = 0; i < variance_mc_configs; ++i) {
                VarianceProfile profile;
                profile.depth = 1 + size_t(rng.below(3));
                profile.width = 2 + size_t(rng.below(15));
                profile.lipschitz = 1.0;
                for (size_t l = 0; l < profile.depth; ++l) {
                    profile.weight_var.push_back(rng.uniform(0.0, 0.3));
                    profile.bias_var.push_back(rng.uniform(0.0, 0.05));
                }
                Tensor x({profile.width});
                for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
                const double bound = variance_bound(profile, l2_norm(x));
                const McVarianceResult est =
                    mc_output_variance(profile, x, variance_mc_trials, derive_seed(variance_mc_seed, 1000 + i));
                const bool ok = est.variance <= bound + 3.0 * est.std_error;
                if (!ok) ++violations;
                rows.push_back({{"L", profile.depth}, {"N", profile.width}, {"bound", bound},
                                {"estimate", est.variance}, {"std_error", est.std_error},
                                {"within_bound", ok}});
            }
            nlohmann::json out{{"configs", variance_mc_configs}, {"trials", variance_mc_trials},
                               {"violations", violations}, {"bound_holds", violations == 0},
                               {"results", rows}};
            std::cout << out.dump(2) << "\n";
        } else if (*cmd_dist) {
            BoundConstants c;
            c.depth = d_depth;
            c.b_sigma = d_bs;
            c.b_theta = d_bt;
            c.b_x = d_bx;
            c.t = d_t;
            c.epsilon = d_eps;
            const DistanceThreshold dt = distance_threshold(c);
            nlohmann::json out{{"threshold", dt.threshold},
                               {"success_probability", dt.success_probability},
                               {"success_probability_std", dt.success_probability_std},
                               {"vacuous", dt.vacuous}};
            std::cout << out.dump(2) << "\n";
        } else if (*cmd_slack) {
            ModelFile tilde = read_model(slack_a);
            ModelFile hat = read_model(slack_b);
            const Dataset data = load_dataset(slack_data, "train");
            const BoundConstants constants = estimate_constants(hat.store, data, s_c, s_t, s_eps);
            std::cout << slack_report(tilde.store, hat.store, constants).to_json().dump(2) << "\n";
        } else if (*cmd_gen) {
            const Dataset data = load_dataset(gen_config, gen_split);
            write_idx(data, gen_images, gen_labels);
            std::cout << "wrote " << gen_images << " and " << gen_labels << " (" << data.size()
                      << " samples)\n";
        } else if (*cmd_pipeline) {
            const Manifest manifest = read_manifest(pipeline_manifest);
            const PipelineResult result = run_pipeline(manifest, &std::cerr);
            std::cout << result.report_path << "\n";
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
