#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "oscar/core.hpp"
#include "oscar/density.hpp"
#include "oscar/engine.hpp"
#include "oscar/eval.hpp"
#include "oscar/synthgen.hpp"

namespace oscar {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Vocabulary / catalog files: JSON arrays of strings
// ---------------------------------------------------------------------------

inline json vocabulary_to_json(const EventVocabulary& vocab) { return json(vocab.symbols()); }

inline EventVocabulary vocabulary_from_json(const json& j) {
    return EventVocabulary::from_symbols(j.get<std::vector<std::string>>());
}

inline json catalog_to_json(const LabelCatalog& catalog) { return json(catalog.names()); }

inline LabelCatalog catalog_from_json(const json& j) {
    return LabelCatalog(j.get<std::vector<std::string>>());
}

// ---------------------------------------------------------------------------
// Line-delimited sequence records
// ---------------------------------------------------------------------------

inline json sequence_to_json(const LabeledSequence& seq, const EventVocabulary& vocab,
                             const LabelCatalog& catalog) {
    json events = json::array();
    for (const auto& ev : seq.events) {
        events.push_back({{"t", ev.time}, {"e", vocab.symbol(ev.event)}});
    }
    json labels = json::array();
    for (std::size_t j = 0; j < seq.labels.size(); ++j) {
        if (seq.labels[j]) labels.push_back(catalog.name(static_cast<LabelIndex>(j)));
    }
    return {{"events", std::move(events)}, {"labels", std::move(labels)}};
}

inline LabeledSequence sequence_from_json(const json& j, const EventVocabulary& vocab,
                                          const LabelCatalog& catalog) {
    LabeledSequence seq;
    for (const auto& ev : j.at("events")) {
        seq.events.push_back(
            TimedEvent{ev.at("t").get<double>(), vocab.index_of(ev.at("e").get<std::string>())});
    }
    seq.labels.assign(catalog.size(), 0);
    for (const auto& name : j.at("labels")) {
        seq.labels[catalog.index_of(name.get<std::string>())] = 1;
    }
    validate_sequence(seq, vocab.size(), catalog.size());
    return seq;
}

inline void write_dataset(std::ostream& os, std::span<const LabeledSequence> seqs,
                          const EventVocabulary& vocab, const LabelCatalog& catalog) {
    for (const auto& seq : seqs) {
        os << sequence_to_json(seq, vocab, catalog).dump() << '\n';
    }
}

inline std::vector<LabeledSequence> read_dataset(std::istream& is, const EventVocabulary& vocab,
                                                 const LabelCatalog& catalog) {
    std::vector<LabeledSequence> seqs;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        seqs.push_back(sequence_from_json(json::parse(line), vocab, catalog));
    }
    return seqs;
}

// ---------------------------------------------------------------------------
// Generator model files
// ---------------------------------------------------------------------------

// Literals serialize as symbols with a '!' prefix for negation, e.g. "!x10".
inline json rule_to_json(const LabelRule& rule, const GeneratorModel& model) {
    json clauses = json::array();
    for (const auto& clause : rule.clauses) {
        json lits = json::array();
        for (const auto& lit : clause) {
            lits.push_back((lit.negated ? "!" : "") + model.vocab.symbol(lit.event));
        }
        clauses.push_back(std::move(lits));
    }
    return {{"label", model.labels.name(rule.label)}, {"clauses", std::move(clauses)}};
}

inline json model_to_json(const GeneratorModel& model) {
    json j;
    j["vocab"] = vocabulary_to_json(model.vocab);
    j["labels"] = catalog_to_json(model.labels);
    j["transition"] = model.transition;
    if (model.lengths.size() == 1) {
        j["length"] = model.lengths[0].length;
    } else {
        json lengths = json::array();
        for (const auto& lw : model.lengths) {
            lengths.push_back({{"length", lw.length}, {"weight", lw.weight}});
        }
        j["length"] = std::move(lengths);
    }
    json rules = json::array();
    for (const auto& rule : model.rules) rules.push_back(rule_to_json(rule, model));
    j["rules"] = std::move(rules);
    json ruleless = json::array();
    for (const auto& rl : model.ruleless) {
        ruleless.push_back({{"label", model.labels.name(rl.label)}, {"prob", rl.prob}});
    }
    j["ruleless"] = std::move(ruleless);
    j["seed"] = model.seed;
    return j;
}

inline GeneratorModel model_from_json(const json& j) {
    GeneratorModel model;
    model.vocab = vocabulary_from_json(j.at("vocab"));
    model.labels = catalog_from_json(j.at("labels"));
    model.transition = j.at("transition").get<std::vector<std::vector<double>>>();
    const auto& length = j.at("length");
    if (length.is_number()) {
        model.lengths = GeneratorModel::fixed_length(length.get<std::size_t>());
    } else {
        for (const auto& lw : length) {
            model.lengths.push_back(LengthWeight{lw.at("length").get<std::size_t>(),
                                                 lw.at("weight").get<double>()});
        }
    }
    for (const auto& rj : j.at("rules")) {
        LabelRule rule;
        rule.label = model.labels.index_of(rj.at("label").get<std::string>());
        for (const auto& cj : rj.at("clauses")) {
            std::vector<Literal> clause;
            for (const auto& lj : cj) {
                std::string text = lj.get<std::string>();
                Literal lit;
                lit.negated = !text.empty() && text[0] == '!';
                lit.event = model.vocab.index_of(lit.negated ? text.substr(1) : text);
                clause.push_back(lit);
            }
            rule.clauses.push_back(std::move(clause));
        }
        model.rules.push_back(std::move(rule));
    }
    if (j.contains("ruleless")) {
        for (const auto& rj : j.at("ruleless")) {
            model.ruleless.push_back(
                RulelessLabel{model.labels.index_of(rj.at("label").get<std::string>()),
                              rj.at("prob").get<double>()});
        }
    }
    model.seed = j.at("seed").get<std::uint64_t>();
    validate_generator_model(model);
    return model;
}

// ---------------------------------------------------------------------------
// Ground-truth boundary files: {label: [symbols]}
// ---------------------------------------------------------------------------

inline json truth_to_json(const MarkovBoundarySet& mb, const EventVocabulary& vocab,
                          const LabelCatalog& catalog) {
    json j = json::object();
    for (std::size_t label = 0; label < mb.per_label.size(); ++label) {
        if (mb.per_label[label].empty()) continue; // no ground truth for this label
        json symbols = json::array();
        for (EventIndex e : mb.per_label[label]) symbols.push_back(vocab.symbol(e));
        j[catalog.name(static_cast<LabelIndex>(label))] = std::move(symbols);
    }
    return j;
}

inline MarkovBoundarySet truth_from_json(const json& j, const EventVocabulary& vocab,
                                         const LabelCatalog& catalog) {
    MarkovBoundarySet mb;
    mb.per_label.resize(catalog.size());
    for (const auto& [name, symbols] : j.items()) {
        auto& set = mb.per_label[catalog.index_of(name)];
        for (const auto& s : symbols) set.insert(vocab.index_of(s.get<std::string>()));
    }
    return mb;
}

// ---------------------------------------------------------------------------
// Fitted n-gram dumps (versioned, exact round-trip)
// ---------------------------------------------------------------------------

inline constexpr std::string_view kNGramFormat = "oscar-ngram-v1";

inline json ngram_to_json(const NGramEstimator& est, const EventVocabulary& vocab,
                          const LabelCatalog& catalog) {
    json j;
    j["format"] = kNGramFormat;
    j["vocab"] = vocabulary_to_json(vocab);
    j["labels"] = catalog_to_json(catalog);
    j["order"] = est.order();
    j["alpha"] = est.alpha();
    j["sequences"] = est.sequences();
    j["tokens"] = est.tokens();
    json events = json::array();
    for (const auto& [ctx, row] : est.event_rows()) {
        events.push_back({{"ctx", ctx}, {"counts", row}});
    }
    j["event_rows"] = std::move(events);
    json labels = json::array();
    for (const auto& [sig, cell] : est.label_rows()) {
        labels.push_back({{"sig", sig}, {"total", cell.total}, {"pos", cell.positives}});
    }
    j["label_rows"] = std::move(labels);
    j["marginal_pos"] = est.label_marginal_positives();
    j["marginal_total"] = est.label_marginal_total();
    return j;
}

inline NGramEstimator ngram_from_json(const json& j, const EventVocabulary& vocab,
                                      const LabelCatalog& catalog) {
    if (j.at("format").get<std::string>() != kNGramFormat) {
        throw InvalidModelError("unsupported estimator format");
    }
    NGramEstimator est(vocab.size(), catalog.size(), j.at("order").get<std::size_t>(),
                       j.at("alpha").get<double>());
    NGramEstimator::EventRows event_rows;
    for (const auto& ej : j.at("event_rows")) {
        event_rows.emplace(ej.at("ctx").get<std::vector<EventIndex>>(),
                           ej.at("counts").get<std::vector<std::uint64_t>>());
    }
    NGramEstimator::LabelRows label_rows;
    for (const auto& lj : j.at("label_rows")) {
        NGramEstimator::LabelCell cell;
        cell.total = lj.at("total").get<std::uint64_t>();
        cell.positives = lj.at("pos").get<std::vector<std::uint64_t>>();
        label_rows.emplace(lj.at("sig").get<std::vector<EventIndex>>(), std::move(cell));
    }
    est.restore_counts(std::move(event_rows), std::move(label_rows),
                       j.at("marginal_pos").get<std::vector<std::uint64_t>>(),
                       j.at("marginal_total").get<std::uint64_t>(),
                       j.at("sequences").get<std::size_t>(), j.at("tokens").get<std::size_t>());
    return est;
}

// ---------------------------------------------------------------------------
// Discovery results: one JSON object per sequence
// ---------------------------------------------------------------------------

inline json discovery_to_json(const DiscoveryResult& result, const EventVocabulary& vocab,
                              const LabelCatalog& catalog) {
    json j = json::object();
    for (std::size_t label = 0; label < result.per_label.size(); ++label) {
        const auto& ld = result.per_label[label];
        json events = json::array();
        for (EventIndex e : ld.event_types) events.push_back(vocab.symbol(e));
        json edges = json::array();
        for (const auto& edge : ld.edges) {
            edges.push_back({{"pos", edge.position},
                             {"event", vocab.symbol(edge.event)},
                             {"cmi", edge.cmi},
                             {"ind_mean", edge.indicator_mean},
                             {"ind_std", edge.indicator_std}});
        }
        j[catalog.name(static_cast<LabelIndex>(label))] = {{"events", std::move(events)},
                                                           {"edges", std::move(edges)},
                                                           {"threshold", ld.threshold}};
    }
    return j;
}

// Inferred event-type sets per label, as needed by the eval module.
inline std::vector<std::set<EventIndex>> inferred_sets_from_json(const json& j,
                                                                 const EventVocabulary& vocab,
                                                                 const LabelCatalog& catalog) {
    std::vector<std::set<EventIndex>> sets(catalog.size());
    for (const auto& [name, entry] : j.items()) {
        auto& set = sets[catalog.index_of(name)];
        for (const auto& s : entry.at("events")) set.insert(vocab.index_of(s.get<std::string>()));
    }
    return sets;
}

// ---------------------------------------------------------------------------
// Evaluation reports
// ---------------------------------------------------------------------------

inline json metrics_to_json(const AggregateMetrics& m) {
    return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

inline json report_to_json(const AggregateReport& rep, const LabelCatalog& catalog) {
    json j;
    j["micro"] = metrics_to_json(rep.micro);
    j["macro"] = metrics_to_json(rep.macro);
    j["weighted"] = metrics_to_json(rep.weighted);
    json strata = json::array();
    for (const auto& [len, st] : rep.by_mb_length) {
        strata.push_back({{"mb_length", len},
                          {"precision", st.mean.precision},
                          {"recall", st.mean.recall},
                          {"f1", st.mean.f1},
                          {"count", st.count}});
    }
    j["by_mb_length"] = std::move(strata);
    json supports = json::object();
    for (std::size_t label = 0; label < rep.label_support.size(); ++label) {
        supports[catalog.name(static_cast<LabelIndex>(label))] = rep.label_support[label];
    }
    j["label_support"] = std::move(supports);
    j["scored_instances"] = rep.scored_instances;
    j["skipped_no_truth"] = rep.skipped_no_truth;
    j["skipped_label_false"] = rep.skipped_label_false;
    j["runtime_seconds"] = rep.runtime_seconds;
    return j;
}

inline std::string report_to_text(const AggregateReport& rep) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << std::left << std::setw(10) << "averaging" << std::right << std::setw(11) << "precision"
       << std::setw(9) << "recall" << std::setw(9) << "f1" << '\n';
    auto row = [&](const char* name, const AggregateMetrics& m) {
        os << std::left << std::setw(10) << name << std::right << std::setw(11) << m.precision
           << std::setw(9) << m.recall << std::setw(9) << m.f1 << '\n';
    };
    row("micro", rep.micro);
    row("macro", rep.macro);
    row("weighted", rep.weighted);
    os << "scored=" << rep.scored_instances << " skipped_no_truth=" << rep.skipped_no_truth
       << " skipped_label_false=" << rep.skipped_label_false << '\n';
    return os.str();
}

inline std::string strata_to_csv(const AggregateReport& rep) {
    std::ostringstream os;
    os << "mb_length,precision,recall,f1,count\n";
    for (const auto& [len, st] : rep.by_mb_length) {
        os << len << ',' << st.mean.precision << ',' << st.mean.recall << ',' << st.mean.f1 << ','
           << st.count << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

inline json make_manifest(const std::string& command, const json& config, std::uint64_t seed) {
    json j;
    j["version"] = std::string(kVersion);
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = config;
    j["config_hash"] = hex64(fnv1a64(config.dump()));
    return j;
}

// ---------------------------------------------------------------------------
// Small file helpers
// ---------------------------------------------------------------------------

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return json::parse(in);
}

inline void save_json_file(const std::string& path, const json& j, int indent = 2) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(indent) << '\n';
}

inline void save_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

} // namespace oscar
