#pragma once

// Command-line front end: resolves a run configuration from built-in defaults,
// per-dataset presets, an optional JSON config file, and flag overrides (in
// that order, flags winning), then drives the pipeline stages.  Every command
// echoes the fully resolved configuration to <out_dir>/config.json so a run
// can be reproduced from that file alone.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgrank/eval.hpp"
#include "kgrank/kg.hpp"
#include "kgrank/kge.hpp"
#include "kgrank/rerank.hpp"
#include "kgrank/synthetic.hpp"
#include "kgrank/types.hpp"
#include "kgrank/util.hpp"

namespace kgrank::cli {

struct RunConfig {
    std::string dataset_dir;
    std::string kind = "curated";  // "curated" or "open"
    int32_t k = 10;
    double lambda = 0.1;
    int32_t k_q = 3;
    int32_t k_c = 3;
    double theta = 0.8;
    int32_t d = 64;
    int32_t d_r = 32;
    int32_t kge_epochs = 50;
    int32_t rr_epochs = 3;
    int32_t batch = 16;
    double lr_kge = 0.05;
    double lr_rr = 1e-4;
    uint64_t seed = 1;
    Toggles toggles;
    std::string out_dir = "out";

    DatasetKind dataset_kind() const {
        require(kind == "curated" || kind == "open", "kind must be \"curated\" or \"open\"");
        return kind == "open" ? DatasetKind::Open : DatasetKind::Curated;
    }
    double effective_lambda() const { return toggles.cci ? lambda : 0.0; }
};

// A partial configuration; fields left empty fall through to the next layer.
struct ConfigPatch {
    std::optional<std::string> dataset_dir, kind, out_dir;
    std::optional<int32_t> k, k_q, k_c, d, d_r, kge_epochs, rr_epochs, batch;
    std::optional<double> lambda, theta, lr_kge, lr_rr;
    std::optional<uint64_t> seed;
    std::optional<bool> qci, cci, qp, cp, cg, dp, gold_first;
};

namespace detail {

inline std::string dir_basename(const std::string& dir) {
    namespace fs = std::filesystem;
    fs::path p = fs::path(dir).lexically_normal();
    std::string name = p.filename().string();
    if (name.empty() || name == ".") name = p.parent_path().filename().string();
    return name;
}

inline void apply_scalars(const ConfigPatch& p, RunConfig& cfg) {
    if (p.dataset_dir) cfg.dataset_dir = *p.dataset_dir;
    if (p.kind) cfg.kind = *p.kind;
    if (p.out_dir) cfg.out_dir = *p.out_dir;
    if (p.k) cfg.k = *p.k;
    if (p.k_q) cfg.k_q = *p.k_q;
    if (p.k_c) cfg.k_c = *p.k_c;
    if (p.d) cfg.d = *p.d;
    if (p.d_r) cfg.d_r = *p.d_r;
    if (p.kge_epochs) cfg.kge_epochs = *p.kge_epochs;
    if (p.rr_epochs) cfg.rr_epochs = *p.rr_epochs;
    if (p.batch) cfg.batch = *p.batch;
    if (p.lambda) cfg.lambda = *p.lambda;
    if (p.theta) cfg.theta = *p.theta;
    if (p.lr_kge) cfg.lr_kge = *p.lr_kge;
    if (p.lr_rr) cfg.lr_rr = *p.lr_rr;
    if (p.seed) cfg.seed = *p.seed;
}

inline void apply_toggles(const ConfigPatch& p, Toggles& t) {
    if (p.qci) t.qci = *p.qci;
    if (p.cci) t.cci = *p.cci;
    if (p.qp) t.qp = *p.qp;
    if (p.cp) t.cp = *p.cp;
    if (p.cg) t.cg = *p.cg;
    if (p.dp) t.dp = *p.dp;
    if (p.gold_first) t.gold_first = *p.gold_first;
}

}  // namespace detail

// Presets for the datasets the method was reported on, keyed by the directory
// basename.  K and lambda follow the per-dataset best settings; d follows the
// first-stage embedding sizes.
inline ConfigPatch dataset_defaults(const std::string& dataset_dir) {
    std::string name = detail::dir_basename(dataset_dir);
    ConfigPatch p;
    if (name == "Wiki27K" || name == "FB15K-237-N") {
        p.kind = "curated";
        p.k = 20;
        p.lambda = 0.1;
        p.d = 256;
    } else if (name == "ReVerb20K") {
        p.kind = "open";
        p.k = 30;
        p.lambda = 0.3;
        p.d = 768;
    } else if (name == "ReVerb45K") {
        p.kind = "open";
        p.k = 30;
        p.lambda = 1.0;
        p.d = 768;
    }
    return p;
}

inline ConfigPatch patch_from_json(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), "cannot open config file: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        fail("config file " + path + ": " + e.what());
    }
    require(j.is_object(), "config file " + path + ": top level must be an object");

    ConfigPatch p;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "dataset_dir") p.dataset_dir = value.get<std::string>();
            else if (key == "kind") p.kind = value.get<std::string>();
            else if (key == "out_dir") p.out_dir = value.get<std::string>();
            else if (key == "k") p.k = value.get<int32_t>();
            else if (key == "k_q") p.k_q = value.get<int32_t>();
            else if (key == "k_c") p.k_c = value.get<int32_t>();
            else if (key == "d") p.d = value.get<int32_t>();
            else if (key == "d_r") p.d_r = value.get<int32_t>();
            else if (key == "kge_epochs") p.kge_epochs = value.get<int32_t>();
            else if (key == "rr_epochs") p.rr_epochs = value.get<int32_t>();
            else if (key == "batch") p.batch = value.get<int32_t>();
            else if (key == "lambda") p.lambda = value.get<double>();
            else if (key == "theta") p.theta = value.get<double>();
            else if (key == "lr_kge") p.lr_kge = value.get<double>();
            else if (key == "lr_rr") p.lr_rr = value.get<double>();
            else if (key == "seed") p.seed = value.get<uint64_t>();
            else if (key == "toggles") {
                require(value.is_object(), "config key \"toggles\" must be an object");
                for (const auto& [tk, tv] : value.items()) {
                    if (tk == "qci") p.qci = tv.get<bool>();
                    else if (tk == "cci") p.cci = tv.get<bool>();
                    else if (tk == "qp") p.qp = tv.get<bool>();
                    else if (tk == "cp") p.cp = tv.get<bool>();
                    else if (tk == "cg") p.cg = tv.get<bool>();
                    else if (tk == "dp") p.dp = tv.get<bool>();
                    else if (tk == "gold_first") p.gold_first = tv.get<bool>();
                    else fail("config file " + path + ": unknown toggle \"" + tk + "\"");
                }
            } else {
                fail("config file " + path + ": unknown key \"" + key + "\"");
            }
        } catch (const nlohmann::json::exception& e) {
            fail("config file " + path + ", key \"" + key + "\": " + e.what());
        }
    }
    return p;
}

// Layering: built-in defaults, then dataset presets, then the config file,
// then flags.  Kind-dependent toggle defaults (open KGs retrieve prompts)
// apply before explicit toggle settings.
struct Resolved {
    RunConfig cfg;
    bool dp_explicit = false;
};

inline Resolved resolve(const ConfigPatch& file, const ConfigPatch& flags) {
    RunConfig cfg;
    std::string dir = flags.dataset_dir ? *flags.dataset_dir : file.dataset_dir.value_or("");
    detail::apply_scalars(dataset_defaults(dir), cfg);
    detail::apply_scalars(file, cfg);
    detail::apply_scalars(flags, cfg);

    if (cfg.kind == "open") {
        cfg.toggles.qp = true;
        cfg.toggles.cp = true;
    }
    detail::apply_toggles(file, cfg.toggles);
    detail::apply_toggles(flags, cfg.toggles);
    return {cfg, file.dp.has_value() || flags.dp.has_value()};
}

// Curated datasets that ship entity definitions use them by default.
inline void finalize_dp(RunConfig& cfg, const KnowledgeGraph& kg, bool dp_explicit) {
    if (!dp_explicit && cfg.kind == "curated" && kg.has_definitions()) cfg.toggles.dp = true;
}

inline void validate(const RunConfig& cfg) {
    cfg.dataset_kind();
    require(cfg.k >= 1, "k must be at least 1");
    require(cfg.lambda >= 0.0 && cfg.lambda <= 1.0, "lambda must lie in [0,1]");
    require(cfg.theta >= 0.0 && cfg.theta <= 1.0, "theta must lie in [0,1]");
    require(cfg.k_q >= 1 && cfg.k_c >= 1, "k_q and k_c must be at least 1");
    require(cfg.d >= 1 && cfg.d_r >= 1, "d and d_r must be at least 1");
    require(cfg.kge_epochs >= 0 && cfg.rr_epochs >= 0, "epoch counts must be nonnegative");
    require(cfg.batch >= 1, "batch must be at least 1");
    require(cfg.lr_kge > 0.0 && cfg.lr_rr > 0.0, "learning rates must be positive");
    if (cfg.k != 10 && cfg.k != 20 && cfg.k != 30)
        std::cerr << "[config] warning: k=" << cfg.k << " is outside the usual {10,20,30}\n";
}

inline nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["dataset_dir"] = cfg.dataset_dir;
    j["kind"] = cfg.kind;
    j["k"] = cfg.k;
    j["lambda"] = cfg.lambda;
    j["k_q"] = cfg.k_q;
    j["k_c"] = cfg.k_c;
    j["theta"] = cfg.theta;
    j["d"] = cfg.d;
    j["d_r"] = cfg.d_r;
    j["kge_epochs"] = cfg.kge_epochs;
    j["rr_epochs"] = cfg.rr_epochs;
    j["batch"] = cfg.batch;
    j["lr_kge"] = cfg.lr_kge;
    j["lr_rr"] = cfg.lr_rr;
    j["seed"] = cfg.seed;
    j["toggles"] = {{"qci", cfg.toggles.qci},   {"cci", cfg.toggles.cci},
                    {"qp", cfg.toggles.qp},     {"cp", cfg.toggles.cp},
                    {"cg", cfg.toggles.cg},     {"dp", cfg.toggles.dp},
                    {"gold_first", cfg.toggles.gold_first}};
    j["out_dir"] = cfg.out_dir;
    return j;
}

namespace detail {

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    require(os.good(), "cannot write " + path);
    os << text;
    require(os.good(), "failed writing " + path);
}

inline void write_config_echo(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    write_text_file(cfg.out_dir + "/config.json", config_to_json(cfg).dump(2) + "\n");
}

inline std::string artifact(const RunConfig& cfg, const char* name) {
    return cfg.out_dir + "/" + name;
}

inline KnowledgeGraph load_kg(RunConfig& cfg, bool dp_explicit) {
    require(!cfg.dataset_dir.empty(), "no dataset directory given (--dataset or config)");
    KnowledgeGraph kg = load_dataset(cfg.dataset_dir, cfg.dataset_kind());
    finalize_dp(cfg, kg, dp_explicit);
    validate(cfg);
    return kg;
}

inline KgeModel load_kge_checkpoint(const RunConfig& cfg, const KnowledgeGraph& kg) {
    std::string path = artifact(cfg, "kge.bin");
    require(std::filesystem::exists(path), "missing checkpoint " + path + " (run train-kge first)");
    KgeModel m = kge_load(path);
    require(m.n_entities == kg.entity_count() && m.n_relations == kg.relation_count(),
            "checkpoint " + path + " does not match the dataset vocabularies");
    return m;
}

inline void print_epoch_logs(const char* stage, const std::vector<EpochLog>& log) {
    for (const auto& e : log) {
        nlohmann::ordered_json j;
        j["stage"] = stage;
        j["epoch"] = e.epoch;
        j["ce"] = e.ce;
        j["rank_loss"] = e.rank_loss;
        j["total"] = e.total;
        std::cout << j.dump() << "\n";
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stage bodies.  Each assumes a validated config and throws Error on failure;
// run() adds the stage tag.

inline void do_train_kge(const RunConfig& cfg, const KnowledgeGraph& kg) {
    KgeModel m = kge_init(kg.entity_count(), kg.relation_count(), cfg.d, cfg.seed);
    auto history = kge_train(m, kg.train, {cfg.kge_epochs, cfg.lr_kge, cfg.seed});
    for (size_t i = 0; i < history.size(); ++i) {
        nlohmann::ordered_json j;
        j["stage"] = "train-kge";
        j["epoch"] = static_cast<int>(i);
        j["loss"] = history[i];
        std::cout << j.dump() << "\n";
    }
    kge_save(m, detail::artifact(cfg, "kge.bin"));
}

inline SampleSet do_build_samples(const RunConfig& cfg, const KnowledgeGraph& kg,
                                  const KgeModel& kge) {
    SampleSet set = build_training_samples(kg, kge, cfg.k, cfg.seed, cfg.toggles);
    save_samples(set.samples, detail::artifact(cfg, "samples.jsonl"));
    nlohmann::ordered_json j;
    j["stage"] = "build-samples";
    j["samples"] = set.samples.size();
    j["gold_absent_fraction"] = set.gold_absent_fraction;
    std::cout << j.dump() << "\n";
    return set;
}

inline RerankerModel do_train_rerank(const RunConfig& cfg,
                                     const std::vector<RerankSample>& samples) {
    RerankerModel m = reranker_init(RerankerModel{}.vocab, cfg.d_r, cfg.seed);
    m.k_train = cfg.k;
    m.lambda = cfg.effective_lambda();
    m.qci = cfg.toggles.qci;
    m.dp = cfg.toggles.dp;
    RerankTrainConfig tc;
    tc.epochs = cfg.rr_epochs;
    tc.batch = cfg.batch;
    tc.lr = cfg.lr_rr;
    tc.lambda = m.lambda;
    tc.seed = cfg.seed;
    auto log = train_reranker(m, samples, tc);
    detail::print_epoch_logs("train-rerank", log);
    reranker_save(m, detail::artifact(cfg, "reranker.bin"));
    return m;
}

inline RankingMetrics do_eval(const RunConfig& cfg, const KnowledgeGraph& kg, const KgeModel& kge,
                              const RerankerModel* reranker) {
    EvalOptions opts;
    opts.k = cfg.k;
    opts.toggles = cfg.toggles;
    opts.k_q = cfg.k_q;
    opts.k_c = cfg.k_c;
    opts.theta = cfg.theta;
    std::unique_ptr<ModelScorer> scorer;
    if (reranker != nullptr && cfg.toggles.any_rerank())
        scorer = std::make_unique<ModelScorer>(*reranker);
    RankingMetrics m = evaluate(kg, kge, scorer.get(), opts);
    detail::write_text_file(detail::artifact(cfg, "metrics.json"), metrics_to_json(m).dump(2) + "\n");
    std::cout << metrics_table(m) << "\n";
    return m;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_ingest(RunConfig cfg, bool dp_explicit) {
    KnowledgeGraph kg = detail::load_kg(cfg, dp_explicit);
    detail::write_config_echo(cfg);
    auto row = [](const std::string& a, const std::string& b) {
        std::string pad(a.size() < 14 ? 14 - a.size() : 1, ' ');
        return a + pad + b + "\n";
    };
    std::string out;
    out += row("entities", std::to_string(kg.entity_count()));
    out += row("relations", std::to_string(kg.relation_count()));
    out += row("train", std::to_string(kg.train.size()));
    out += row("valid", std::to_string(kg.valid.size()));
    out += row("test", std::to_string(kg.test.size()));
    out += row("duplicates", std::to_string(kg.duplicates_train) + "/" +
                                 std::to_string(kg.duplicates_valid) + "/" +
                                 std::to_string(kg.duplicates_test));
    out += row("definitions", kg.has_definitions() ? "yes" : "no");
    out += row("templates", kg.relation_templates.empty() ? "no" : "yes");
    out += row("clusters", kg.has_clusters() ? std::to_string(kg.cluster_count) : "no");
    std::cout << out;
    return 0;
}

inline int cmd_train_kge(RunConfig cfg, bool dp_explicit) {
    KnowledgeGraph kg = detail::load_kg(cfg, dp_explicit);
    detail::write_config_echo(cfg);
    do_train_kge(cfg, kg);
    return 0;
}

inline int cmd_build_samples(RunConfig cfg, bool dp_explicit) {
    KnowledgeGraph kg = detail::load_kg(cfg, dp_explicit);
    detail::write_config_echo(cfg);
    KgeModel kge = detail::load_kge_checkpoint(cfg, kg);
    do_build_samples(cfg, kg, kge);
    return 0;
}

inline int cmd_train_rerank(RunConfig cfg, bool dp_explicit) {
    KnowledgeGraph kg = detail::load_kg(cfg, dp_explicit);
    detail::write_config_echo(cfg);
    std::string path = detail::artifact(cfg, "samples.jsonl");
    require(std::filesystem::exists(path), "missing " + path + " (run build-samples first)");
    auto samples = load_samples(path);
    do_train_rerank(cfg, samples);
    return 0;
}

inline int cmd_eval(RunConfig cfg, bool dp_explicit) {
    KnowledgeGraph kg = detail::load_kg(cfg, dp_explicit);
    detail::write_config_echo(cfg);
    KgeModel kge = detail::load_kge_checkpoint(cfg, kg);
    RerankerModel reranker;
    const RerankerModel* rr = nullptr;
    if (cfg.toggles.any_rerank()) {
        std::string path = detail::artifact(cfg, "reranker.bin");
        require(std::filesystem::exists(path),
                "missing checkpoint " + path + " (run train-rerank first)");
        reranker = reranker_load(path);
        rr = &reranker;
    }
    do_eval(cfg, kg, kge, rr);
    return 0;
}

inline int cmd_pipeline(RunConfig cfg, bool dp_explicit) {
    KnowledgeGraph kg = detail::load_kg(cfg, dp_explicit);
    detail::write_config_echo(cfg);
    do_train_kge(cfg, kg);
    KgeModel kge = kge_load(detail::artifact(cfg, "kge.bin"));
    SampleSet set = do_build_samples(cfg, kg, kge);
    RerankerModel reranker = do_train_rerank(cfg, set.samples);
    do_eval(cfg, kg, kge, cfg.toggles.any_rerank() ? &reranker : nullptr);
    return 0;
}

// Toggle combination for the ablation grid: a comma-separated list of toggle
// names to enable ("none" for the Base row); unlisted toggles are off.
inline Toggles parse_combo(const std::string& spec) {
    Toggles t;
    t.qci = t.cci = t.cg = false;
    if (spec == "none") return t;
    if (spec == "full") {
        t.qci = t.cci = t.cg = true;
        return t;
    }
    for (const auto& name : split(spec, ',')) {
        if (name == "qci") t.qci = true;
        else if (name == "cci") t.cci = true;
        else if (name == "qp") t.qp = true;
        else if (name == "cp") t.cp = true;
        else if (name == "cg") t.cg = true;
        else if (name == "dp") t.dp = true;
        else fail("unknown toggle \"" + name + "\" in combo \"" + spec + "\"");
    }
    return t;
}

inline std::string combo_key(const Toggles& t) {
    std::string key;
    for (bool b : {t.qci, t.cci, t.qp, t.cp, t.cg, t.dp}) key += b ? '1' : '0';
    return key;
}

// Evaluates each toggle combination against the trained first stage.  The KGE
// checkpoint is reused as-is; the re-ranker is retrained only when a
// training-side toggle (qci, cci) differs from an already-trained variant.
inline int cmd_ablate(RunConfig cfg, bool dp_explicit, std::vector<std::string> combos) {
    if (combos.empty()) combos = {"full", "cci,cg", "qci,cg", "qci,cci", "none"};
    KnowledgeGraph kg = detail::load_kg(cfg, dp_explicit);
    detail::write_config_echo(cfg);
    KgeModel kge = detail::load_kge_checkpoint(cfg, kg);

    std::map<bool, SampleSet> samples_by_qci;
    std::map<std::pair<bool, double>, std::shared_ptr<RerankerModel>> trained;
    nlohmann::ordered_json results;

    for (const auto& spec : combos) {
        Toggles t = parse_combo(spec);
        t.gold_first = cfg.toggles.gold_first;
        RunConfig run = cfg;
        run.toggles = t;

        const RerankerModel* rr = nullptr;
        std::shared_ptr<RerankerModel> model;
        if (t.any_rerank()) {
            auto key = std::make_pair(t.qci, run.effective_lambda());
            auto it = trained.find(key);
            if (it == trained.end()) {
                auto sit = samples_by_qci.find(t.qci);
                if (sit == samples_by_qci.end()) {
                    Toggles build = cfg.toggles;
                    build.qci = t.qci;
                    SampleSet set = build_training_samples(kg, kge, cfg.k, cfg.seed, build);
                    sit = samples_by_qci.emplace(t.qci, std::move(set)).first;
                }
                model = std::make_shared<RerankerModel>(
                    do_train_rerank(run, sit->second.samples));
                trained.emplace(key, model);
            } else {
                model = it->second;
            }
            rr = model.get();
        }

        EvalOptions opts;
        opts.k = run.k;
        opts.toggles = t;
        opts.k_q = run.k_q;
        opts.k_c = run.k_c;
        opts.theta = run.theta;
        std::unique_ptr<ModelScorer> scorer;
        if (rr != nullptr) scorer = std::make_unique<ModelScorer>(*rr);
        RankingMetrics m = evaluate(kg, kge, scorer.get(), opts);

        std::string key = combo_key(t);
        results[key] = metrics_to_json(m);
        std::cout << key << " (" << spec << ")\n" << metrics_table(m) << "\n";
    }
    detail::write_text_file(detail::artifact(cfg, "ablate.json"), results.dump(2) + "\n");
    return 0;
}

inline int cmd_synth(const SyntheticConfig& sc, const std::string& out_dir) {
    require(!out_dir.empty(), "no output directory given (--out)");
    KnowledgeGraph kg = make_synthetic_kg(sc);
    save_dataset(kg, out_dir);
    nlohmann::ordered_json j;
    j["stage"] = "synth";
    j["entities"] = kg.entity_count();
    j["relations"] = kg.relation_count();
    j["train"] = kg.train.size();
    j["valid"] = kg.valid.size();
    j["test"] = kg.test.size();
    std::cout << j.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Flag wiring

namespace detail {

struct FlagCapture {
    std::string config_path;
    std::string dataset_dir, kind, out_dir;
    int32_t k = 0, k_q = 0, k_c = 0, d = 0, d_r = 0;
    int32_t kge_epochs = 0, rr_epochs = 0, batch = 0;
    double lambda = 0, theta = 0, lr_kge = 0, lr_rr = 0;
    uint64_t seed = 0;
    bool qci = false, cci = false, qp = false, cp = false, cg = false, dp = false;
    bool gold_first = false;
};

inline void add_common_flags(CLI::App* sub, FlagCapture& c) {
    sub->add_option("--config", c.config_path, "JSON config file; flags override its values");
    sub->add_option("--dataset", c.dataset_dir, "dataset directory");
    sub->add_option("--kind", c.kind, "dataset kind: curated or open");
    sub->add_option("--out", c.out_dir, "output directory for checkpoints and reports");
    sub->add_option("--k", c.k, "re-ranked candidate count");
    sub->add_option("--lambda", c.lambda, "ranking loss weight in [0,1]");
    sub->add_option("--k-q", c.k_q, "retrieved query-related triples");
    sub->add_option("--k-c", c.k_c, "retrieved candidate-supporting triples");
    sub->add_option("--theta", c.theta, "similarity threshold for candidate support");
    sub->add_option("--d", c.d, "first-stage embedding dimension");
    sub->add_option("--d-r", c.d_r, "re-ranker hidden dimension");
    sub->add_option("--kge-epochs", c.kge_epochs, "first-stage training epochs");
    sub->add_option("--rr-epochs", c.rr_epochs, "re-ranker training epochs");
    sub->add_option("--batch", c.batch, "re-ranker batch size");
    sub->add_option("--lr-kge", c.lr_kge, "first-stage learning rate");
    sub->add_option("--lr-rr", c.lr_rr, "re-ranker learning rate");
    sub->add_option("--seed", c.seed, "run seed");
    sub->add_flag("--qci,!--no-qci", c.qci, "candidates rendered as filled-in queries");
    sub->add_flag("--cci,!--no-cci", c.cci, "ranking loss against first-stage score order");
    sub->add_flag("--qp,!--no-qp", c.qp, "retrieved query-related prompt");
    sub->add_flag("--cp,!--no-cp", c.cp, "retrieved candidate-supporting prompt");
    sub->add_flag("--cg,!--no-cg", c.cg, "constrained option generation");
    sub->add_flag("--dp,!--no-dp", c.dp, "entity definitions appended to the query");
    sub->add_flag("--gold-first,!--no-gold-first", c.gold_first,
                  "promote the gold answer to rank 1 in training targets");
}

inline ConfigPatch patch_from_flags(const CLI::App* sub, const FlagCapture& c) {
    ConfigPatch p;
    auto set = [&](const char* name) { return sub->count(name) > 0; };
    if (set("--dataset")) p.dataset_dir = c.dataset_dir;
    if (set("--kind")) p.kind = c.kind;
    if (set("--out")) p.out_dir = c.out_dir;
    if (set("--k")) p.k = c.k;
    if (set("--k-q")) p.k_q = c.k_q;
    if (set("--k-c")) p.k_c = c.k_c;
    if (set("--d")) p.d = c.d;
    if (set("--d-r")) p.d_r = c.d_r;
    if (set("--kge-epochs")) p.kge_epochs = c.kge_epochs;
    if (set("--rr-epochs")) p.rr_epochs = c.rr_epochs;
    if (set("--batch")) p.batch = c.batch;
    if (set("--lambda")) p.lambda = c.lambda;
    if (set("--theta")) p.theta = c.theta;
    if (set("--lr-kge")) p.lr_kge = c.lr_kge;
    if (set("--lr-rr")) p.lr_rr = c.lr_rr;
    if (set("--seed")) p.seed = c.seed;
    if (set("--qci")) p.qci = c.qci;
    if (set("--cci")) p.cci = c.cci;
    if (set("--qp")) p.qp = c.qp;
    if (set("--cp")) p.cp = c.cp;
    if (set("--cg")) p.cg = c.cg;
    if (set("--dp")) p.dp = c.dp;
    if (set("--gold-first")) p.gold_first = c.gold_first;
    return p;
}

}  // namespace detail

inline int run(std::vector<std::string> args) {
    CLI::App app{"two-stage knowledge graph completion with a trainable re-ranker"};
    app.require_subcommand(1);

    struct Sub {
        CLI::App* app;
        detail::FlagCapture flags;
        std::function<int(RunConfig, bool)> body;
    };
    std::vector<std::unique_ptr<Sub>> subs;
    auto add = [&](const char* name, const char* desc, std::function<int(RunConfig, bool)> body) {
        auto s = std::make_unique<Sub>();
        s->app = app.add_subcommand(name, desc);
        s->body = std::move(body);
        detail::add_common_flags(s->app, s->flags);
        subs.push_back(std::move(s));
        return subs.back().get();
    };

    add("ingest", "load and validate a dataset, print its counts", cmd_ingest);
    add("train-kge", "train the first-stage embedding model", cmd_train_kge);
    add("build-samples", "infer training queries and write re-ranking samples", cmd_build_samples);
    add("train-rerank", "train the re-ranker on built samples", cmd_train_rerank);
    add("eval", "evaluate with the filtered ranking protocol", cmd_eval);
    auto* pipeline = add("pipeline", "run all stages end to end", cmd_pipeline);
    (void)pipeline;

    std::vector<std::string> combos;
    auto* ablate = add("ablate", "evaluate toggle combinations against trained checkpoints",
                       [&combos](RunConfig cfg, bool dp_explicit) {
                           return cmd_ablate(std::move(cfg), dp_explicit, combos);
                       });
    ablate->app->add_option("--combo", combos,
                            "toggle combination, e.g. qci,cci,cg or full or none (repeatable)");

    SyntheticConfig sc;
    std::string synth_out;
    CLI::App* synth = app.add_subcommand("synth", "write a seeded synthetic dataset");
    synth->add_option("--out", synth_out, "dataset directory to write")->required();
    synth->add_option("--entities", sc.entities, "entity count");
    synth->add_option("--relations", sc.relations, "relation count");
    synth->add_option("--groups", sc.groups, "entity group count");
    synth->add_option("--tails-per-head", sc.tails_per_head, "facts per head and relation");
    synth->add_option("--noise", sc.noise_frac, "fraction of rewired tails");
    synth->add_option("--seed", sc.seed, "generator seed");
    synth->add_flag("--tag-match,!--no-tag-match", sc.tag_match,
                    "every relation resolves to tail-group entities sharing the head's tag");
    synth->add_option("--group-tokens", sc.group_tokens, "label tokens spelling out the group (1..3)");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (synth->parsed()) return cmd_synth(sc, synth_out);
        for (auto& s : subs) {
            if (!s->app->parsed()) continue;
            ConfigPatch file;
            if (s->app->count("--config") > 0) file = patch_from_json(s->flags.config_path);
            Resolved r = resolve(file, detail::patch_from_flags(s->app, s->flags));
            return s->body(std::move(r.cfg), r.dp_explicit);
        }
        fail("no subcommand given");
    } catch (const Error& e) {
        std::string tag = "kgrank";
        for (auto& s : subs)
            if (s->app->parsed()) tag = s->app->get_name();
        std::cerr << "[" << tag << "] error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

inline int run(int argc, const char* const* argv) {
    return run(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace kgrank::cli
