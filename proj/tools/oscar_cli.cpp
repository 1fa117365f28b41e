// Command-line front end: generate / fit / discover / evaluate / bench /
// export-dot, driven by a JSON config with flag overrides (flags win).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "oscar/oscar.hpp"

namespace fs = std::filesystem;
using oscar::json;

namespace {

// ---------------------------------------------------------------------------
// Logging (stderr, level from OSCAR_KIT_LOG)
// ---------------------------------------------------------------------------

enum class LogLevel { off = 0, error = 1, warn = 2, info = 3, debug = 4 };

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("OSCAR_KIT_LOG");
        if (env == nullptr) return LogLevel::warn;
        const std::string v(env);
        if (v == "off") return LogLevel::off;
        if (v == "error") return LogLevel::error;
        if (v == "warn") return LogLevel::warn;
        if (v == "info") return LogLevel::info;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::warn;
    }();
    return level;
}

void log(LogLevel level, const std::string& msg) {
    static const char* names[] = {"off", "error", "warn", "info", "debug"};
    if (level <= log_level() && level != LogLevel::off) {
        std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
    }
}

// ---------------------------------------------------------------------------
// Config handling
// ---------------------------------------------------------------------------

// Flag values captured by CLI11; applied on top of the config file.
struct FlagOverrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_particles;
    std::optional<std::string> strategy;
    std::optional<std::size_t> k;
    std::optional<double> p;
    std::optional<double> temperature;
    std::optional<std::size_t> context_floor;
    std::optional<double> z_coeff;
    std::optional<std::string> backend;
    std::optional<std::size_t> parallelism;
    std::optional<std::string> out;

    std::optional<std::string> model;
    std::optional<std::string> dataset;
    std::optional<std::string> corpus;
    std::optional<std::string> estimator;
    std::optional<std::string> results;
    std::optional<std::string> truth;
    std::optional<std::string> vocab;
    std::optional<std::string> labels;
    std::optional<std::size_t> n_sequences;
    std::optional<std::size_t> limit;
    std::optional<std::size_t> order;
    std::optional<double> alpha;
    std::optional<std::size_t> folds;
    std::optional<std::string> truth_restriction;
};

json merged_config(const FlagOverrides& f) {
    json cfg = json::object();
    if (!f.config_path.empty()) cfg = oscar::load_json_file(f.config_path);
    if (!cfg.contains("sampling")) cfg["sampling"] = json::object();
    if (!cfg.contains("threshold")) cfg["threshold"] = json::object();

    auto set = [&cfg](const char* key, const auto& opt) {
        if (opt) cfg[key] = *opt;
    };
    set("seed", f.seed);
    set("backend", f.backend);
    set("parallelism", f.parallelism);
    set("out", f.out);
    set("model", f.model);
    set("dataset", f.dataset);
    set("corpus", f.corpus);
    set("estimator", f.estimator);
    set("results", f.results);
    set("truth", f.truth);
    set("vocab", f.vocab);
    set("labels", f.labels);
    set("n_sequences", f.n_sequences);
    set("limit", f.limit);
    set("order", f.order);
    set("alpha", f.alpha);
    set("folds", f.folds);
    set("truth_restriction", f.truth_restriction);
    if (f.n_particles) cfg["sampling"]["n_particles"] = *f.n_particles;
    if (f.strategy) cfg["sampling"]["strategy"] = *f.strategy;
    if (f.k) cfg["sampling"]["k"] = *f.k;
    if (f.p) cfg["sampling"]["p"] = *f.p;
    if (f.temperature) cfg["sampling"]["temperature"] = *f.temperature;
    if (f.context_floor) cfg["sampling"]["context_floor"] = *f.context_floor;
    if (f.z_coeff) cfg["threshold"]["z_coefficient"] = *f.z_coeff;
    return cfg;
}

// Collects every violation instead of stopping at the first.
struct Validator {
    const json& cfg;
    std::vector<std::string> errors = {};

    void require(const char* key, const char* why) {
        if (!cfg.contains(key)) {
            errors.push_back(std::string("missing '") + key + "': " + why);
        }
    }
    void require_path(const char* key, const char* why) {
        require(key, why);
        if (cfg.contains(key)) {
            const auto path = cfg.at(key).get<std::string>();
            if (!fs::exists(path)) {
                errors.push_back(std::string("path for '") + key + "' does not exist: " + path);
            }
        }
    }
    void require_out() {
        if (!cfg.contains("out")) {
            errors.push_back("missing 'out': output directory is required");
        }
    }
    void check_sampling() {
        try {
            oscar::SamplingConfig sc = parse_sampling(cfg, 0);
            oscar::validate_sampling_config(sc);
        } catch (const std::exception& e) {
            errors.push_back(std::string("sampling config: ") + e.what());
        }
    }
    void check_threshold() {
        try {
            oscar::validate_threshold_config(parse_threshold(cfg));
        } catch (const std::exception& e) {
            errors.push_back(std::string("threshold config: ") + e.what());
        }
    }
    void check_backend() {
        if (cfg.contains("backend")) {
            const auto b = cfg.at("backend").get<std::string>();
            if (b != "oracle" && b != "ngram") {
                errors.push_back("backend must be 'oracle' or 'ngram', got '" + b + "'");
            }
        } else {
            errors.push_back("missing 'backend': choose 'oracle' or 'ngram'");
        }
    }

    static oscar::SamplingConfig parse_sampling(const json& cfg, std::uint64_t seed) {
        oscar::SamplingConfig sc;
        sc.seed = seed;
        if (!cfg.contains("sampling")) return sc;
        const auto& s = cfg.at("sampling");
        if (s.contains("n_particles")) sc.n_particles = s.at("n_particles").get<std::size_t>();
        if (s.contains("strategy")) sc.strategy = oscar::parse_strategy(s.at("strategy").get<std::string>());
        if (s.contains("k")) sc.top_k = s.at("k").get<std::size_t>();
        if (s.contains("p")) sc.top_p = s.at("p").get<double>();
        if (s.contains("temperature") && !s.at("temperature").is_null()) {
            sc.temperature = s.at("temperature").get<double>();
        }
        if (s.contains("context_floor")) sc.context_floor = s.at("context_floor").get<std::size_t>();
        if (s.contains("clamp_epsilon")) sc.clamp_epsilon = s.at("clamp_epsilon").get<double>();
        return sc;
    }

    static oscar::ThresholdConfig parse_threshold(const json& cfg) {
        oscar::ThresholdConfig tc;
        if (cfg.contains("threshold") && cfg.at("threshold").contains("z_coefficient")) {
            tc.z_coefficient = cfg.at("threshold").at("z_coefficient").get<double>();
        }
        return tc;
    }
};

int fail_config(const std::vector<std::string>& errors) {
    json out;
    out["errors"] = errors;
    std::cerr << out.dump() << "\n";
    return 2;
}

void ensure_out_dir(const json& cfg) { fs::create_directories(cfg.at("out").get<std::string>()); }

std::string out_path(const json& cfg, const std::string& file) {
    return (fs::path(cfg.at("out").get<std::string>()) / file).string();
}

void write_manifest(const json& cfg, const std::string& command) {
    const std::uint64_t seed = cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>() : 0;
    oscar::save_json_file(out_path(cfg, "manifest_" + command + ".json"),
                          oscar::make_manifest(command, cfg, seed));
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_generate(const json& cfg) {
    Validator v{cfg};
    v.require_path("model", "generator model JSON");
    v.require("seed", "dataset sampling must be reproducible");
    v.require("n_sequences", "number of sequences to draw");
    v.require_out();
    if (!v.errors.empty()) return fail_config(v.errors);

    auto model = oscar::model_from_json(oscar::load_json_file(cfg.at("model").get<std::string>()));
    model.seed = cfg.at("seed").get<std::uint64_t>();
    const auto n = cfg.at("n_sequences").get<std::size_t>();
    log(LogLevel::info, "sampling " + std::to_string(n) + " sequences");
    auto seqs = oscar::sample_dataset(model, n);

    ensure_out_dir(cfg);
    std::ofstream ds(out_path(cfg, "dataset.jsonl"));
    oscar::write_dataset(ds, seqs, model.vocab, model.labels);
    oscar::save_json_file(out_path(cfg, "vocab.json"), oscar::vocabulary_to_json(model.vocab));
    oscar::save_json_file(out_path(cfg, "labels.json"), oscar::catalog_to_json(model.labels));
    const auto truth = oscar::true_markov_boundary(model.rules, model.labels.size());
    oscar::save_json_file(out_path(cfg, "truth_mb.json"),
                          oscar::truth_to_json(truth, model.vocab, model.labels));
    write_manifest(cfg, "generate");
    return 0;
}

int cmd_fit(const json& cfg) {
    Validator v{cfg};
    v.require_path("corpus", "training dataset (JSONL)");
    v.require_path("vocab", "vocabulary JSON array");
    v.require_path("labels", "label catalog JSON array");
    v.require_out();
    if (!v.errors.empty()) return fail_config(v.errors);

    const auto vocab = oscar::vocabulary_from_json(
        oscar::load_json_file(cfg.at("vocab").get<std::string>()));
    const auto catalog = oscar::catalog_from_json(
        oscar::load_json_file(cfg.at("labels").get<std::string>()));
    std::ifstream in(cfg.at("corpus").get<std::string>());
    auto corpus = oscar::read_dataset(in, vocab, catalog);

    const std::size_t order = cfg.value("order", 3);
    const double alpha = cfg.value("alpha", 0.5);
    log(LogLevel::info, "fitting order-" + std::to_string(order) + " estimator on " +
                            std::to_string(corpus.size()) + " sequences");
    auto est = oscar::NGramEstimator::fit(corpus, vocab.size(), catalog.size(), order, alpha);

    ensure_out_dir(cfg);
    oscar::save_json_file(out_path(cfg, "estimator.json"), oscar::ngram_to_json(est, vocab, catalog),
                          -1);
    write_manifest(cfg, "fit");
    return 0;
}

struct LoadedBackend {
    oscar::EstimatorPair pair;
    oscar::EventVocabulary vocab;
    oscar::LabelCatalog catalog;
};

double enumeration_budget(const json& cfg) {
    return cfg.value("enumeration_budget", oscar::kDefaultEnumerationBudget);
}

LoadedBackend load_backend(const json& cfg) {
    const auto backend = cfg.at("backend").get<std::string>();
    if (backend == "oracle") {
        auto model = oscar::model_from_json(
            oscar::load_json_file(cfg.at("model").get<std::string>()));
        auto vocab = model.vocab;
        auto catalog = model.labels;
        return LoadedBackend{oscar::oracle_pair(std::move(model), enumeration_budget(cfg)),
                             std::move(vocab), std::move(catalog)};
    }
    const auto j = oscar::load_json_file(cfg.at("estimator").get<std::string>());
    auto vocab = oscar::vocabulary_from_json(j.at("vocab"));
    auto catalog = oscar::catalog_from_json(j.at("labels"));
    auto est = oscar::ngram_from_json(j, vocab, catalog);
    auto md = est.metadata();
    return LoadedBackend{oscar::EstimatorPair(std::move(est), std::move(md)), std::move(vocab),
                         std::move(catalog)};
}

int cmd_discover(const json& cfg) {
    Validator v{cfg};
    v.require_path("dataset", "sequences to explain (JSONL)");
    v.require("seed", "particle sampling must be reproducible");
    v.check_backend();
    v.check_sampling();
    v.check_threshold();
    v.require_out();
    if (cfg.contains("backend")) {
        if (cfg.at("backend") == "oracle") {
            v.require_path("model", "oracle backend needs the generator model");
        } else if (cfg.at("backend") == "ngram") {
            v.require_path("estimator", "ngram backend needs a fitted estimator");
        }
    }
    if (!v.errors.empty()) return fail_config(v.errors);

    auto backend = load_backend(cfg);
    std::ifstream in(cfg.at("dataset").get<std::string>());
    auto seqs = oscar::read_dataset(in, backend.vocab, backend.catalog);
    if (cfg.contains("limit")) {
        const auto limit = cfg.at("limit").get<std::size_t>();
        if (seqs.size() > limit) seqs.resize(limit);
    }

    const auto sampling = Validator::parse_sampling(cfg, cfg.at("seed").get<std::uint64_t>());
    const auto threshold = Validator::parse_threshold(cfg);
    const std::size_t parallelism = cfg.value("parallelism", 1);
    log(LogLevel::info, "discovering boundaries for " + std::to_string(seqs.size()) +
                            " sequences at parallelism " + std::to_string(parallelism));

    auto items = oscar::discover_batch(backend.pair, seqs, sampling, threshold, parallelism);

    ensure_out_dir(cfg);
    std::ofstream results(out_path(cfg, "results.jsonl"));
    const bool export_dot = cfg.value("export_dot", true);
    if (export_dot) fs::create_directories(out_path(cfg, "dot"));
    std::size_t failures = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!items[i].ok) {
            ++failures;
            json err;
            err["error"] = items[i].error;
            results << err.dump() << '\n';
            log(LogLevel::warn, "sequence " + std::to_string(i) + " failed: " + items[i].error);
            continue;
        }
        results << oscar::discovery_to_json(items[i].result, backend.vocab, backend.catalog).dump()
                << '\n';
        if (export_dot) {
            oscar::save_text_file(
                out_path(cfg, "dot/seq_" + std::to_string(i) + ".dot"),
                oscar::to_dot(items[i].result, backend.vocab, backend.catalog,
                              "seq_" + std::to_string(i)));
        }
    }
    write_manifest(cfg, "discover");
    log(LogLevel::info, std::to_string(items.size() - failures) + " sequences discovered, " +
                            std::to_string(failures) + " failed");
    return 0;
}

int cmd_evaluate(const json& cfg) {
    Validator v{cfg};
    v.require_path("dataset", "sequences the results were computed on");
    v.require_path("results", "discovery results (JSONL)");
    v.require_path("truth", "ground-truth boundary file");
    v.require_path("vocab", "vocabulary JSON array");
    v.require_path("labels", "label catalog JSON array");
    v.require_out();
    const std::string restriction = cfg.value("truth_restriction", "full");
    if (restriction != "full" && restriction != "present") {
        v.errors.push_back("truth_restriction must be 'full' or 'present', got '" + restriction +
                           "'");
    }
    if (!v.errors.empty()) return fail_config(v.errors);

    const auto t0 = std::chrono::steady_clock::now();
    const auto vocab = oscar::vocabulary_from_json(
        oscar::load_json_file(cfg.at("vocab").get<std::string>()));
    const auto catalog = oscar::catalog_from_json(
        oscar::load_json_file(cfg.at("labels").get<std::string>()));
    std::ifstream ds(cfg.at("dataset").get<std::string>());
    auto seqs = oscar::read_dataset(ds, vocab, catalog);
    const auto truth = oscar::truth_from_json(
        oscar::load_json_file(cfg.at("truth").get<std::string>()), vocab, catalog);

    std::vector<oscar::MbScore> scores;
    std::ifstream rs(cfg.at("results").get<std::string>());
    std::string line;
    std::size_t index = 0;
    while (std::getline(rs, line)) {
        if (line.empty()) continue;
        const json record = json::parse(line);
        if (index >= seqs.size()) break;
        if (!record.contains("error")) {
            auto sets = oscar::inferred_sets_from_json(record, vocab, catalog);
            std::set<oscar::EventIndex> present;
            if (restriction == "present") {
                for (const auto& ev : seqs[index].events) present.insert(ev.event);
            }
            for (std::size_t jlab = 0; jlab < catalog.size(); ++jlab) {
                std::set<oscar::EventIndex> label_truth = truth.per_label[jlab];
                if (restriction == "present") {
                    std::set<oscar::EventIndex> reachable;
                    for (oscar::EventIndex e : label_truth) {
                        if (present.count(e)) reachable.insert(e);
                    }
                    label_truth = std::move(reachable);
                }
                scores.push_back(oscar::make_mb_score(
                    index, static_cast<oscar::LabelIndex>(jlab), sets[jlab], label_truth,
                    seqs[index].labels[jlab] != 0));
            }
        }
        ++index;
    }
    if (scores.empty()) return fail_config({"no scorable results found"});

    auto report = oscar::aggregate(scores, truth);
    report.by_mb_length = oscar::stratify_by_mb_length(scores, truth);
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json report_json = oscar::report_to_json(report, catalog);

    // Optional fold partition of the evaluation set: mean and sample std of
    // each averaging across folds (sequence index modulo fold count).
    const std::size_t folds = cfg.value("folds", 1);
    if (folds > 1) {
        std::vector<std::vector<oscar::MbScore>> buckets(folds);
        for (const auto& s : scores) buckets[s.sequence % folds].push_back(s);
        std::vector<json> fold_metrics;
        for (const auto& bucket : buckets) {
            if (bucket.empty()) continue;
            try {
                auto fold_report = oscar::aggregate(bucket, truth);
                fold_metrics.push_back(oscar::report_to_json(fold_report, catalog));
            } catch (const oscar::EmptyInputError&) {
                // fold without scorable instances
            }
        }
        auto mean_std = [&](const char* averaging, const char* metric) {
            double mean = 0.0;
            for (const auto& fj : fold_metrics) mean += fj[averaging][metric].get<double>();
            mean /= static_cast<double>(fold_metrics.size());
            double ss = 0.0;
            for (const auto& fj : fold_metrics) {
                const double d = fj[averaging][metric].get<double>() - mean;
                ss += d * d;
            }
            const double stddev = fold_metrics.size() > 1
                                      ? std::sqrt(ss / static_cast<double>(fold_metrics.size() - 1))
                                      : 0.0;
            return json{{"mean", mean}, {"std", stddev}};
        };
        json folds_json;
        folds_json["count"] = fold_metrics.size();
        for (const char* averaging : {"micro", "macro", "weighted"}) {
            for (const char* metric : {"precision", "recall", "f1"}) {
                folds_json[averaging][metric] = mean_std(averaging, metric);
            }
        }
        report_json["folds"] = std::move(folds_json);
    }

    ensure_out_dir(cfg);
    oscar::save_json_file(out_path(cfg, "report.json"), report_json);
    oscar::save_text_file(out_path(cfg, "report.txt"), oscar::report_to_text(report));
    oscar::save_text_file(out_path(cfg, "strata.csv"), oscar::strata_to_csv(report));
    write_manifest(cfg, "evaluate");
    std::cout << oscar::report_to_text(report);
    return 0;
}

int cmd_bench(const json& cfg) {
    Validator v{cfg};
    v.require_path("model", "bench runs on the oracle backend");
    v.require("seed", "benchmark sampling must be reproducible");
    v.require_out();
    if (!v.errors.empty()) return fail_config(v.errors);

    auto model = oscar::model_from_json(oscar::load_json_file(cfg.at("model").get<std::string>()));
    auto pair = oscar::oracle_pair(model, enumeration_budget(cfg));
    auto seqs = oscar::sample_dataset(model, cfg.value("n_sequences", 64));

    std::vector<std::size_t> particle_counts = cfg.value("particles", std::vector<std::size_t>{16, 32, 64, 128, 256});
    std::vector<std::size_t> batch_sizes = cfg.value("batch_sizes", std::vector<std::size_t>{seqs.size()});
    const std::size_t parallelism = cfg.value("parallelism", 1);

    std::ostringstream csv;
    csv << "n_particles,batch_size,parallelism,wall_ms\n";
    for (std::size_t batch : batch_sizes) {
        std::vector<oscar::LabeledSequence> slice(seqs.begin(),
                                                  seqs.begin() + std::min(batch, seqs.size()));
        for (std::size_t n : particle_counts) {
            auto sampling = Validator::parse_sampling(cfg, cfg.at("seed").get<std::uint64_t>());
            sampling.n_particles = n;
            const auto t0 = std::chrono::steady_clock::now();
            auto items = oscar::discover_batch(pair, slice, sampling,
                                               Validator::parse_threshold(cfg), parallelism);
            const double ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
            for (const auto& item : items) {
                if (!item.ok) throw std::runtime_error("bench sequence failed: " + item.error);
            }
            csv << n << ',' << slice.size() << ',' << parallelism << ',' << ms << '\n';
        }
    }
    ensure_out_dir(cfg);
    oscar::save_text_file(out_path(cfg, "bench.csv"), csv.str());
    write_manifest(cfg, "bench");
    std::cout << csv.str();
    return 0;
}

int cmd_export_dot(const json& cfg) {
    Validator v{cfg};
    v.require_path("results", "discovery results (JSONL)");
    v.require_path("vocab", "vocabulary JSON array");
    v.require_path("labels", "label catalog JSON array");
    v.require_out();
    if (!v.errors.empty()) return fail_config(v.errors);

    const auto vocab = oscar::vocabulary_from_json(
        oscar::load_json_file(cfg.at("vocab").get<std::string>()));
    const auto catalog = oscar::catalog_from_json(
        oscar::load_json_file(cfg.at("labels").get<std::string>()));

    ensure_out_dir(cfg);
    std::ifstream rs(cfg.at("results").get<std::string>());
    std::string line;
    std::size_t index = 0;
    while (std::getline(rs, line)) {
        if (line.empty()) continue;
        const json record = json::parse(line);
        if (!record.contains("error")) {
            // Rebuild a graph-equivalent result from the serialized record.
            oscar::DiscoveryResult result;
            result.per_label.resize(catalog.size());
            std::size_t max_step = 0;
            for (const auto& [name, entry] : record.items()) {
                auto& ld = result.per_label[catalog.index_of(name)];
                ld.threshold = entry.at("threshold").get<double>();
                for (const auto& ej : entry.at("edges")) {
                    oscar::DiscoveredEdge edge;
                    edge.position = ej.at("pos").get<std::size_t>();
                    edge.step = edge.position - 1;
                    edge.event = vocab.index_of(ej.at("event").get<std::string>());
                    edge.cmi = ej.at("cmi").get<double>();
                    edge.indicator_mean = ej.at("ind_mean").get<double>();
                    edge.indicator_std = ej.at("ind_std").get<double>();
                    ld.edges.push_back(edge);
                    ld.event_types.insert(edge.event);
                    max_step = std::max(max_step, edge.step);
                }
            }
            result.sequence_length = max_step;
            oscar::save_text_file(out_path(cfg, "seq_" + std::to_string(index) + ".dot"),
                                  oscar::to_dot(result, vocab, catalog,
                                                "seq_" + std::to_string(index)));
        }
        ++index;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"One-shot per-sequence Markov Boundary discovery toolkit"};
    app.require_subcommand(1);

    FlagOverrides f;
    auto add_common = [&f](CLI::App* cmd) {
        cmd->add_option("--config", f.config_path, "JSON config file (flags override it)");
        cmd->add_option("--seed", f.seed, "random seed (mandatory where randomness is used)");
        cmd->add_option("--n-particles", f.n_particles, "Monte-Carlo particle count");
        cmd->add_option("--strategy", f.strategy,
                        "sampling strategy: none|permutation|top_k|top_k_nucleus");
        cmd->add_option("--k", f.k, "top-k truncation width");
        cmd->add_option("--p", f.p, "nucleus mass");
        cmd->add_option("--temperature", f.temperature, "log-probability temperature");
        cmd->add_option("--context-floor", f.context_floor, "resampled context length");
        cmd->add_option("--z-coeff", f.z_coeff, "dynamic threshold z coefficient");
        cmd->add_option("--backend", f.backend, "density backend: oracle|ngram");
        cmd->add_option("--parallelism", f.parallelism, "worker count");
        cmd->add_option("--out", f.out, "output directory");
        cmd->add_option("--model", f.model, "generator model JSON path");
        cmd->add_option("--dataset", f.dataset, "dataset JSONL path");
        cmd->add_option("--corpus", f.corpus, "training corpus JSONL path");
        cmd->add_option("--estimator", f.estimator, "fitted estimator path");
        cmd->add_option("--results", f.results, "discovery results path");
        cmd->add_option("--truth", f.truth, "ground-truth boundary path");
        cmd->add_option("--vocab", f.vocab, "vocabulary JSON path");
        cmd->add_option("--labels", f.labels, "label catalog JSON path");
        cmd->add_option("--n", f.n_sequences, "sequence count for generate/bench");
        cmd->add_option("--limit", f.limit, "cap the number of discovered sequences");
        cmd->add_option("--order", f.order, "n-gram order");
        cmd->add_option("--alpha", f.alpha, "additive smoothing");
        cmd->add_option("--folds", f.folds, "report fold-partitioned mean and std");
        cmd->add_option("--truth-restriction", f.truth_restriction,
                        "score against 'full' rule variables or only those 'present'");
    };

    auto* generate = app.add_subcommand("generate", "sample a labeled dataset with ground truth");
    auto* fit = app.add_subcommand("fit", "fit the count-based estimator on a corpus");
    auto* discover = app.add_subcommand("discover", "recover per-sequence Markov Boundaries");
    auto* evaluate = app.add_subcommand("evaluate", "score recovered boundaries against truth");
    auto* bench = app.add_subcommand("bench", "measure runtime vs particle count and batch size");
    auto* export_dot = app.add_subcommand("export-dot", "render discovery results as DOT graphs");
    for (auto* cmd : {generate, fit, discover, evaluate, bench, export_dot}) add_common(cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        json cfg = merged_config(f);
        if (generate->parsed()) return cmd_generate(cfg);
        if (fit->parsed()) return cmd_fit(cfg);
        if (discover->parsed()) return cmd_discover(cfg);
        if (evaluate->parsed()) return cmd_evaluate(cfg);
        if (bench->parsed()) return cmd_bench(cfg);
        if (export_dot->parsed()) return cmd_export_dot(cfg);
    } catch (const std::exception& e) {
        json err;
        err["error"] = e.what();
        std::cerr << err.dump() << "\n";
        log(LogLevel::error, e.what());
        return 3;
    }
    return 0;
}
