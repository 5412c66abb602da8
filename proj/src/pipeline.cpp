#include "adaloc/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "adaloc/locking.hpp"
#include "adaloc/model_io.hpp"
#include "adaloc/rng.hpp"

namespace adaloc {

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
        h ^= uint8_t(c);
        h *= 1099511628211ULL;
    }
    return h;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.eta = j.value("eta", cfg.eta);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.momentum = j.value("momentum", cfg.momentum);
    if (j.contains("sparsify")) {
        SparsifyConfig sp;
        for (const auto& pj : j.at("sparsify").at("phases")) {
            sp.phases.push_back({pj.at("epochs").get<size_t>(), pj.at("lambda").get<double>()});
        }
        sp.unit_floor = j.at("sparsify").value("unit_floor", 0.0);
        sp.keep_units = j.at("sparsify").value("keep_units", size_t(0));
        sp.clean_epochs = j.at("sparsify").value("clean_epochs", size_t(0));
        cfg.sparsify = sp;
    }
    return cfg;
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    nlohmann::json j{{"eta", cfg.eta},
                     {"epochs", cfg.epochs},
                     {"batch_size", cfg.batch_size},
                     {"seed", cfg.seed},
                     {"momentum", cfg.momentum}};
    if (cfg.sparsify) {
        nlohmann::json phases = nlohmann::json::array();
        for (const SparsifyPhase& p : cfg.sparsify->phases) {
            phases.push_back({{"epochs", p.epochs}, {"lambda", p.lambda}});
        }
        j["sparsify"] = {{"phases", phases},
                         {"unit_floor", cfg.sparsify->unit_floor},
                         {"keep_units", cfg.sparsify->keep_units},
                         {"clean_epochs", cfg.sparsify->clean_epochs}};
    }
    return j;
}

DataConfig parse_data_config(const nlohmann::json& j) {
    DataConfig cfg;
    cfg.kind = j.at("kind").get<std::string>();
    cfg.feature_scale = j.value("feature_scale", 1.0);
    if (cfg.kind == "blobs") {
        cfg.blobs.class_count = j.value("classes", cfg.blobs.class_count);
        cfg.blobs.dim = j.value("dim", cfg.blobs.dim);
        cfg.blobs.spread = j.value("spread", cfg.blobs.spread);
        cfg.blobs.max_norm = j.value("max_norm", cfg.blobs.max_norm);
        cfg.blobs.seed = j.value("seed", cfg.blobs.seed);
        cfg.per_class_train = j.value("per_class_train", size_t(500));
        cfg.per_class_test = j.value("per_class_test", size_t(100));
    } else if (cfg.kind == "images") {
        cfg.images.class_count = j.value("classes", cfg.images.class_count);
        cfg.images.noise = j.value("noise", cfg.images.noise);
        cfg.images.bumps = j.value("bumps", cfg.images.bumps);
        cfg.images.seed = j.value("seed", cfg.images.seed);
        cfg.per_class_train = j.value("per_class_train", size_t(200));
        cfg.per_class_test = j.value("per_class_test", size_t(100));
    } else if (cfg.kind == "idx") {
        cfg.train_images = j.at("train_images").get<std::string>();
        cfg.train_labels = j.at("train_labels").get<std::string>();
        cfg.test_images = j.at("test_images").get<std::string>();
        cfg.test_labels = j.at("test_labels").get<std::string>();
    } else if (cfg.kind == "csv") {
        cfg.train_csv = j.at("train").get<std::string>();
        cfg.test_csv = j.at("test").get<std::string>();
    } else {
        throw ValidationError("unknown dataset kind: " + cfg.kind);
    }
    return cfg;
}

nlohmann::json dump_data_config(const DataConfig& cfg) {
    nlohmann::json j{{"kind", cfg.kind}};
    j["feature_scale"] = cfg.feature_scale;
    if (cfg.kind == "blobs") {
        j["classes"] = cfg.blobs.class_count;
        j["dim"] = cfg.blobs.dim;
        j["spread"] = cfg.blobs.spread;
        j["max_norm"] = cfg.blobs.max_norm;
        j["seed"] = cfg.blobs.seed;
        j["per_class_train"] = cfg.per_class_train;
        j["per_class_test"] = cfg.per_class_test;
    } else if (cfg.kind == "images") {
        j["classes"] = cfg.images.class_count;
        j["noise"] = cfg.images.noise;
        j["bumps"] = cfg.images.bumps;
        j["seed"] = cfg.images.seed;
        j["per_class_train"] = cfg.per_class_train;
        j["per_class_test"] = cfg.per_class_test;
    } else if (cfg.kind == "idx") {
        j["train_images"] = cfg.train_images;
        j["train_labels"] = cfg.train_labels;
        j["test_images"] = cfg.test_images;
        j["test_labels"] = cfg.test_labels;
    } else {
        j["train"] = cfg.train_csv;
        j["test"] = cfg.test_csv;
    }
    return j;
}

}  // namespace

DataConfig DataConfig::from_json(const nlohmann::json& j) { return parse_data_config(j); }

nlohmann::json DataConfig::to_json() const { return dump_data_config(*this); }

Dataset DataConfig::load(const std::string& split) const {
    Dataset ds = load_unscaled(split);
    if (feature_scale != 1.0) {
        for (Sample& s : ds.samples) {
            for (double& v : s.input.data) v *= feature_scale;
        }
    }
    return ds;
}

Dataset DataConfig::load_unscaled(const std::string& split) const {
    const bool train = split == "train";
    if (kind == "blobs") {
        BlobsConfig cfg = blobs;
        cfg.split = split;
        cfg.per_class = train ? per_class_train : per_class_test;
        return gen_blobs(cfg);
    }
    if (kind == "images") {
        ImageTaskConfig cfg = images;
        cfg.split = split;
        cfg.per_class = train ? per_class_train : per_class_test;
        return gen_image_task(cfg);
    }
    if (kind == "idx") {
        return train ? load_idx(train_images, train_labels) : load_idx(test_images, test_labels);
    }
    if (kind == "csv") {
        return load_csv(train ? train_csv : test_csv);
    }
    throw ValidationError("unknown dataset kind: " + kind);
}

std::string StrategyConfig::label() const {
    if (strategy == TrainStrategy::KeyPool) {
        return "key-pool-" + std::to_string(size_t(std::lround(pool_fraction * 100.0)));
    }
    return train_strategy_name(strategy);
}

void Manifest::validate() const {
    network.validate();
    key.validate();
    pretrain.validate();
    adapt.validate();
    if (strategies.empty()) throw ValidationError("manifest: no strategies listed");
    for (size_t i = 0; i < strategies.size(); ++i) {
        for (size_t j = i + 1; j < strategies.size(); ++j) {
            if (strategies[i].label() == strategies[j].label())
                throw ValidationError("manifest: duplicate strategy " + strategies[i].label());
        }
        if (strategies[i].strategy == TrainStrategy::KeyPool &&
            strategies[i].pool_fraction < key.rho) {
            throw ValidationError("manifest: pool_fraction below rho for " + strategies[i].label());
        }
    }
    if (output_dir.empty()) throw ValidationError("manifest: output_dir must be set");
}

Manifest Manifest::from_json(const nlohmann::json& j) {
    Manifest m;
    m.name = j.value("name", m.name);
    m.seed = j.value("seed", m.seed);
    m.network = NetworkSpec::from_json(j.at("network"));
    m.source = DataConfig::from_json(j.at("source"));
    m.target = DataConfig::from_json(j.at("target"));
    if (j.contains("key")) {
        m.key.rho = j.at("key").value("rho", m.key.rho);
        m.key.seed = j.at("key").value("seed", derive_seed(m.seed, 3));
    } else {
        m.key.seed = derive_seed(m.seed, 3);
    }
    for (const auto& sj : j.at("strategies")) {
        StrategyConfig sc;
        sc.strategy = train_strategy_from_name(sj.at("strategy").get<std::string>());
        sc.pool_fraction = sj.value("pool_fraction", 0.0);
        m.strategies.push_back(sc);
    }
    m.pretrain = train_config_from_json(j.at("pretrain"));
    if (!j.at("pretrain").contains("seed")) m.pretrain.seed = derive_seed(m.seed, 2);
    m.adapt = train_config_from_json(j.at("adapt"));
    if (!j.at("adapt").contains("seed")) m.adapt.seed = derive_seed(m.seed, 4);
    if (j.contains("bounds")) {
        const auto& bj = j.at("bounds");
        m.bounds.epsilon = bj.value("epsilon", m.bounds.epsilon);
        m.bounds.t = bj.value("t", m.bounds.t);
        m.bounds.c = bj.value("c", m.bounds.c);
        m.bounds.variance_mc_configs = bj.value("variance_mc_configs", m.bounds.variance_mc_configs);
        m.bounds.variance_mc_trials = bj.value("variance_mc_trials", m.bounds.variance_mc_trials);
    }
    m.output_dir = j.value("output_dir", m.output_dir);
    m.validate();
    return m;
}

nlohmann::json Manifest::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["seed"] = seed;
    j["network"] = network.to_json();
    j["source"] = source.to_json();
    j["target"] = target.to_json();
    j["key"] = {{"rho", key.rho}, {"seed", key.seed}};
    nlohmann::json strategies_json = nlohmann::json::array();
    for (const StrategyConfig& s : strategies) {
        nlohmann::json sj{{"strategy", train_strategy_name(s.strategy)}};
        if (s.strategy == TrainStrategy::KeyPool) sj["pool_fraction"] = s.pool_fraction;
        strategies_json.push_back(sj);
    }
    j["strategies"] = std::move(strategies_json);
    j["pretrain"] = train_config_to_json(pretrain);
    j["adapt"] = train_config_to_json(adapt);
    j["bounds"] = {{"epsilon", bounds.epsilon},
                   {"t", bounds.t},
                   {"c", bounds.c},
                   {"variance_mc_configs", bounds.variance_mc_configs},
                   {"variance_mc_trials", bounds.variance_mc_trials}};
    j["output_dir"] = output_dir;
    return j;
}

Manifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad manifest JSON: ") + e.what());
    }
    Manifest m = Manifest::from_json(j);
    if (const char* env = std::getenv("ADALOC_SEED")) {
        m.seed = std::strtoull(env, nullptr, 10);
        m.pretrain.seed = derive_seed(m.seed, 2);
        m.key.seed = derive_seed(m.seed, 3);
        m.adapt.seed = derive_seed(m.seed, 4);
    }
    return m;
}

namespace {

struct Stage {
    static std::string& current() {
        static thread_local std::string name;
        return name;
    }
    explicit Stage(std::string n, std::ostream* log) {
        current() = std::move(n);
        if (log) *log << "[stage] " << current() << "\n" << std::flush;
    }
};

std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot hash missing file: " + path);
    Sha256 h;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h.update(buf, size_t(in.gcount()));
        if (!in) break;
    }
    return hash_to_hex(h.finish());
}

nlohmann::json eval_to_json(const EvalReport& er) {
    return nlohmann::json{{"accuracy", er.accuracy},
                          {"metric_m", er.metric_m},
                          {"per_class_accuracy", er.per_class_accuracy},
                          {"sample_count", er.sample_count}};
}

bool stores_identical(const ParameterStore& a, const ParameterStore& b) {
    const std::vector<double> fa = a.flatten();
    const std::vector<double> fb = b.flatten();
    if (fa.size() != fb.size()) return false;
    for (size_t i = 0; i < fa.size(); ++i) {
        if (fa[i] != fb[i]) return false;
    }
    return true;
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

}  // namespace

static PipelineResult run_pipeline_stages(const Manifest& manifest, std::ostream* log);

PipelineResult run_pipeline(const Manifest& manifest, std::ostream* log) {
    try {
        return run_pipeline_stages(manifest, log);
    } catch (const IoError& e) {
        throw IoError("pipeline stage '" + Stage::current() + "': " + e.what());
    } catch (const Error& e) {
        throw ValidationError("pipeline stage '" + Stage::current() + "': " + e.what());
    }
}

static PipelineResult run_pipeline_stages(const Manifest& manifest, std::ostream* log) {
    Stage setup("setup", log);
    manifest.validate();
    namespace fs = std::filesystem;
    const fs::path out_dir(manifest.output_dir);
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    nlohmann::json report;
    report["name"] = manifest.name;
    report["seed"] = manifest.seed;
    {
        // Identifies the experiment; where the artifacts land is not part of it.
        nlohmann::json mj = manifest.to_json();
        mj.erase("output_dir");
        report["manifest_hash"] = hash_to_hex(sha256(mj.dump()));
    }
    nlohmann::json files = nlohmann::json::object();

    auto emit_model = [&](const std::string& file, const ParameterStore& store,
                          const nlohmann::json& aux = nlohmann::json::object()) {
        const std::string path = (out_dir / file).string();
        write_model(path, store, aux);
        files[file] = file_hash_hex(path);
        return path;
    };
    auto emit_key = [&](const std::string& file, const Key& key) {
        const std::string path = (out_dir / file).string();
        write_key(path, key);
        files[file] = file_hash_hex(path);
        return path;
    };

    // (1) pretrain on the source task
    Stage s1("pretrain", log);
    const Dataset source_train = manifest.source.load("train");
    const Dataset source_test = manifest.source.load("test");
    ParameterStore initial = init_network(manifest.network, derive_seed(manifest.seed, 1));
    TrainConfig pre_cfg = manifest.pretrain;
    pre_cfg.strategy = TrainStrategy::Full;
    FinetuneResult pretrain = finetune(initial, source_train, nullptr, pre_cfg, nullptr);
    ParameterStore& theta_star = pretrain.params;
    theta_star.tag = ModelTag::Pretrained;
    emit_model("model_pretrained.adlm", theta_star);
    {
        const std::string curves = (out_dir / "curves_pretrain.csv").string();
        write_metrics_csv(curves, pretrain.metrics);
        files["curves_pretrain.csv"] = file_hash_hex(curves);
    }
    report["source_eval"] = eval_to_json(evaluate(theta_star, source_test));

    const Dataset target_train = manifest.target.load("train");
    const Dataset target_test = manifest.target.load("test");
    report["target_eval_before_adaptation"] = eval_to_json(evaluate(theta_star, target_test));

    const size_t d = theta_star.dim();

    // (2)+(3)+(4): per strategy, localize/lock/adapt/refresh/evaluate.
    ParameterStore theta_hat = theta_star;  // full fine-tune result
    ParameterStore theta_tilde_top = theta_star;
    bool have_full = false, have_top = false;
    GradProfile full_profile;

    nlohmann::json strategies_json = nlohmann::json::array();
    for (const StrategyConfig& sc : manifest.strategies) {
        Stage stage("strategy " + sc.label(), log);
        nlohmann::json sj;
        sj["strategy"] = train_strategy_name(sc.strategy);
        sj["label"] = sc.label();

        TrainConfig adapt_cfg = manifest.adapt;
        adapt_cfg.strategy = sc.strategy;

        if (sc.strategy == TrainStrategy::Full) {
            FinetuneResult full = finetune_profiled(theta_star, target_train, &target_test,
                                                    adapt_cfg, nullptr, &full_profile);
            theta_hat = full.params;
            have_full = true;
            const std::string curves_name = "curves_full.csv";
            write_metrics_csv((out_dir / curves_name).string(), full.metrics);
            files[curves_name] = file_hash_hex((out_dir / curves_name).string());
            emit_model("adapted_full.adlm", theta_hat);
            sj["authorized"] = eval_to_json(evaluate(theta_hat, target_test));
            sj["unauthorized"] = nullptr;  // no lock in the baseline
            strategies_json.push_back(std::move(sj));
            continue;
        }

        // key per strategy
        KeySpec ks = manifest.key;
        ks.seed = derive_seed(manifest.key.seed, fnv1a(sc.label()));
        Key key;
        switch (sc.strategy) {
            case TrainStrategy::KeyTop:
                ks.strategy = KeyStrategy::Top;
                ks.pool_fraction = ks.rho;
                key = localize_key(theta_star, ks);
                break;
            case TrainStrategy::KeyPool:
                ks.strategy = KeyStrategy::PoolSample;
                ks.pool_fraction = sc.pool_fraction;
                key = sample_key_pool(theta_star, ks);
                break;
            case TrainStrategy::KeyRandom:
                ks.strategy = KeyStrategy::Random;
                ks.pool_fraction = ks.rho;
                key = baseline_key(theta_star, ks);
                break;
            case TrainStrategy::KeyBottom:
                ks.strategy = KeyStrategy::Bottom;
                ks.pool_fraction = ks.rho;
                key = baseline_key(theta_star, ks);
                break;
            default:
                throw ContractError("unreachable strategy");
        }
        emit_key("key_" + sc.label() + ".adak", key);

        const LockedModel locked = lock(theta_star, key);
        emit_model("locked_" + sc.label() + ".adlm", locked.params,
                   nlohmann::json{{"fingerprint", hash_to_hex(locked.fingerprint)},
                                  {"source_hash", hash_to_hex(locked.source_hash)},
                                  {"key_indices_hash", hash_to_hex(locked.key_indices_hash)}});

        // Authorized users start from the unlocked model; asserted bit-exact.
        const ParameterStore start = unlock(locked, key);
        if (!stores_identical(start, theta_star))
            throw ContractError("pipeline: unlock(lock(theta)) != theta");

        FinetuneResult adapted = finetune(start, target_train, &target_test, adapt_cfg, &key);
        const std::string curves_name = "curves_" + sc.label() + ".csv";
        write_metrics_csv((out_dir / curves_name).string(), adapted.metrics);
        files[curves_name] = file_hash_hex((out_dir / curves_name).string());
        emit_model("adapted_" + sc.label() + ".adlm", adapted.params);

        // Masking exactness: every non-key coordinate bit-identical.
        bool masking_exact = true;
        {
            std::vector<uint8_t> in_key(d, 0);
            for (const KeyEntry& e : key.entries) in_key[e.index] = 1;
            const std::vector<double> before = theta_star.flatten();
            const std::vector<double> after = adapted.params.flatten();
            for (size_t i = 0; i < d; ++i) {
                if (!in_key[i] && before[i] != after[i]) {
                    masking_exact = false;
                    break;
                }
            }
        }
        if (!masking_exact) throw ContractError("pipeline: masking violated for " + sc.label());
        sj["masking_exact"] = masking_exact;

        const Key refreshed = refresh_key(adapted.params, key);
        emit_key("refreshed_" + sc.label() + ".adak", refreshed);

        const ParameterStore authorized_model = unlock(locked, refreshed);
        if (!stores_identical(authorized_model, adapted.params))
            throw ContractError("pipeline: unlock with refreshed key != adapted model");

        // Stripping the refreshed key from the adapted model reproduces the
        // original locked artifact exactly (masking kept everything else put).
        {
            ParameterStore stripped = adapted.params;
            for (const KeyEntry& e : refreshed.entries) stripped.set_flat(e.index, 0.0);
            stripped.tag = ModelTag::Locked;
            sj["strip_equals_locked"] = content_hash(stripped) == content_hash(locked.params);
        }

        sj["authorized"] = eval_to_json(evaluate(authorized_model, target_test));
        sj["unauthorized"] = eval_to_json(evaluate(locked.params, target_test));

        // Key compactness accounting.
        nlohmann::json unit_fractions = nlohmann::json::array();
        {
            std::vector<size_t> per_layer(manifest.network.layers.size(), 0);
            for (const auto& [layer, unit] : key.unit_list) per_layer[layer] += 1;
            for (size_t li = 0; li + 1 < manifest.network.layers.size(); ++li) {
                const size_t units = manifest.network.layers[li].unit_count();
                unit_fractions.push_back({{"layer", li},
                                          {"selected", per_layer[li]},
                                          {"units", units},
                                          {"fraction", double(per_layer[li]) / double(units)}});
            }
        }
        sj["selected_units"] = std::move(unit_fractions);
        sj["key_entry_count"] = key.entries.size();
        sj["key_param_fraction"] = double(key.entries.size()) / double(d);

        if (sc.strategy == TrainStrategy::KeyTop) {
            theta_tilde_top = authorized_model;
            have_top = true;
        }
        strategies_json.push_back(std::move(sj));
    }
    report["strategies"] = std::move(strategies_json);

    // (5) bound report, variance-bound MC check, ordering stats
    Stage s5("bounds", log);
    if (have_full && have_top) {
        const BoundConstants constants = estimate_constants(theta_hat, target_train, manifest.bounds.c,
                                                            manifest.bounds.t, manifest.bounds.epsilon);
        report["bound_report"] = slack_report(theta_tilde_top, theta_hat, constants).to_json();
    }

    if (manifest.bounds.variance_mc_configs > 0) {
        nlohmann::json mc;
        size_t violations = 0;
        nlohmann::json rows = nlohmann::json::array();
        Rng rng(derive_seed(manifest.seed, 6));
        for (size_t i = 0; i < manifest.bounds.variance_mc_configs; ++i) {
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
            const McVarianceResult est = mc_output_variance(profile, x, manifest.bounds.variance_mc_trials,
                                                            derive_seed(manifest.seed, 700 + i));
            const bool ok = est.variance <= bound + 3.0 * est.std_error;
            if (!ok) ++violations;
            rows.push_back({{"L", profile.depth},
                            {"N", profile.width},
                            {"bound", bound},
                            {"estimate", est.variance},
                            {"std_error", est.std_error},
                            {"within_bound", ok}});
        }
        mc["configs"] = manifest.bounds.variance_mc_configs;
        mc["trials"] = manifest.bounds.variance_mc_trials;
        mc["violations"] = violations;
        mc["results"] = std::move(rows);
        report["variance_mc"] = std::move(mc);
    }

    {
        nlohmann::json ordering;
        nlohmann::json sp = nlohmann::json::array();
        if (have_full) {
            for (const auto& rho : full_profile.per_layer_spearman) {
                if (rho) sp.push_back(*rho);
                else sp.push_back(nullptr);
            }
        }
        ordering["profile_spearman_per_layer"] = std::move(sp);
        nlohmann::json checks = nlohmann::json::array();
        for (size_t layer = 1; layer < manifest.network.layers.size(); ++layer) {
            if (manifest.network.layers[layer - 1].unit_count() < 2) continue;
            const OrderingReport r = gradient_ordering_check(
                theta_hat, target_test.samples.front().input, layer,
                target_test.samples.front().label);
            nlohmann::json cj{{"layer", layer}, {"pair_count", r.pair_count},
                              {"respected", r.respected}, {"fraction", r.fraction}};
            if (r.spearman) cj["spearman"] = *r.spearman;
            else cj["spearman"] = nullptr;
            checks.push_back(std::move(cj));
        }
        ordering["checks"] = std::move(checks);
        report["ordering"] = std::move(ordering);
    }

    report["files"] = std::move(files);
    report["generated_at"] = timestamp_utc();

    PipelineResult result;
    result.report_path = (out_dir / "report.json").string();
    atomic_write_file(result.report_path, report.dump(2) + "\n");
    result.report = std::move(report);
    return result;
}

}  // namespace adaloc
