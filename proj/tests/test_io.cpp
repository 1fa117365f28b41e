#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "oscar/export_dot.hpp"
#include "oscar/io.hpp"

#include "test_support.hpp"

using namespace oscar;

TEST_CASE("vocabulary and catalog files are plain string arrays") {
    EventVocabulary vocab("BOS", {"a", "b"});
    auto j = vocabulary_to_json(vocab);
    CHECK(j.is_array());
    CHECK(vocabulary_from_json(j) == vocab);

    LabelCatalog catalog({"y1", "y2"});
    CHECK(catalog_from_json(catalog_to_json(catalog)) == catalog);
}

TEST_CASE("generator model files round-trip") {
    GeneratorModel model;
    model.vocab = testing::make_vocab(4);
    model.labels = LabelCatalog({"y1", "coin"});
    model.transition = {
        {0.0, 0.25, 0.25, 0.25, 0.25},
        {0.0, 0.1, 0.2, 0.3, 0.4},
        {0.0, 0.4, 0.3, 0.2, 0.1},
        {0.0, 0.25, 0.5, 0.125, 0.125},
        {0.0, 1.0, 0.0, 0.0, 0.0},
    };
    model.lengths = {LengthWeight{4, 0.75}, LengthWeight{6, 0.25}};
    model.rules = {LabelRule{
        0, {{Literal{1, false}}, {Literal{2, false}, Literal{3, true}}, {Literal{4, true}}}}};
    model.ruleless = {RulelessLabel{1, 0.125}};
    model.seed = 987654321;

    auto j = model_to_json(model);
    auto back = model_from_json(j);
    CHECK(back.vocab == model.vocab);
    CHECK(back.labels == model.labels);
    CHECK(back.transition == model.transition);
    CHECK(back.lengths == model.lengths);
    CHECK(back.rules == model.rules);
    CHECK(back.ruleless == model.ruleless);
    CHECK(back.seed == model.seed);

    // Negated literals read back from the '!' prefix.
    CHECK(j["rules"][0]["clauses"][1][1] == "!x3");
}

TEST_CASE("fixed-length models serialize the length as a bare number") {
    auto model = testing::two_event_model(5);
    auto j = model_to_json(model);
    CHECK(j["length"] == 5);
    CHECK(model_from_json(j).lengths == model.lengths);
}

TEST_CASE("ground-truth boundary files round-trip and skip empty labels") {
    auto model = testing::two_event_model(3);
    MarkovBoundarySet mb;
    mb.per_label = {{1, 2}, {}};
    LabelCatalog catalog({"y1", "coin"});
    auto j = truth_to_json(mb, model.vocab, catalog);
    CHECK(j.contains("y1"));
    CHECK_FALSE(j.contains("coin"));
    auto back = truth_from_json(j, model.vocab, catalog);
    CHECK(back.per_label[0] == mb.per_label[0]);
    CHECK(back.per_label[1].empty());
}

TEST_CASE("fitted n-gram dumps round-trip exactly") {
    auto model = testing::uniform_model(3, 5, {LabelRule{0, {{Literal{1, false}}}}});
    auto corpus = sample_dataset(model, 400);
    auto est = NGramEstimator::fit(corpus, model.vocab.size(), 1, 3, 0.5);

    auto j = ngram_to_json(est, model.vocab, model.labels);
    CHECK(j["format"] == kNGramFormat);
    auto back = ngram_from_json(j, model.vocab, model.labels);
    CHECK(back == est);

    // Round-trip through actual text, exercising float formatting.
    auto j2 = json::parse(j.dump());
    CHECK(ngram_from_json(j2, model.vocab, model.labels) == est);

    json wrong = j;
    wrong["format"] = "other";
    CHECK_THROWS_AS(ngram_from_json(wrong, model.vocab, model.labels), InvalidModelError);
}

TEST_CASE("discovery results serialize to the per-label record shape") {
    auto model = testing::two_event_model(2);
    auto pair = oracle_pair(model);
    LabeledSequence seq;
    seq.events = {{1.0, 2}, {2.0, 1}};
    seq.labels = {1};

    SamplingConfig cfg;
    cfg.strategy = SamplingStrategy::none;
    cfg.context_floor = 1;
    ThresholdConfig tcfg;
    tcfg.z_coefficient = 0.0; // retain anything at or above the mean
    auto result = discover(pair, seq, cfg, tcfg);
    auto j = discovery_to_json(result, model.vocab, model.labels);

    REQUIRE(j.contains("y1"));
    const auto& entry = j["y1"];
    CHECK(entry.contains("events"));
    CHECK(entry.contains("edges"));
    CHECK(entry.contains("threshold"));
    for (const auto& edge : entry["edges"]) {
        CHECK(edge.contains("pos"));
        CHECK(edge.contains("event"));
        CHECK(edge.contains("cmi"));
        CHECK(edge.contains("ind_mean"));
        CHECK(edge.contains("ind_std"));
    }

    auto sets = inferred_sets_from_json(j, model.vocab, model.labels);
    CHECK(sets.size() == 1);
    CHECK(sets[0] == result.per_label[0].event_types);
}

TEST_CASE("reports serialize with strata and supports") {
    MarkovBoundarySet truth;
    truth.per_label = {{1, 2}};
    std::vector<MbScore> scores;
    MbScore m;
    m.label = 0;
    m.precision = m.recall = m.f1 = 1.0;
    m.true_positives = m.inferred_size = m.truth_size = 2;
    m.label_true_in_sequence = true;
    m.ground_truth_available = true;
    scores.push_back(m);
    auto rep = aggregate(scores, truth);
    rep.by_mb_length = stratify_by_mb_length(scores, truth);

    LabelCatalog catalog({"y1"});
    auto j = report_to_json(rep, catalog);
    CHECK(j["weighted"]["f1"] == 1.0);
    CHECK(j["label_support"]["y1"] == 1);
    CHECK(j["by_mb_length"][0]["mb_length"] == 2);

    auto text = report_to_text(rep);
    CHECK(text.find("micro") != std::string::npos);
    CHECK(text.find("weighted") != std::string::npos);

    auto csv = strata_to_csv(rep);
    CHECK(csv.find("mb_length,precision,recall,f1,count") == 0);
}

TEST_CASE("manifest hashes are stable for identical configs") {
    json config = {{"seed", 7}, {"backend", "oracle"}};
    auto m1 = make_manifest("discover", config, 7);
    auto m2 = make_manifest("discover", config, 7);
    CHECK(m1["config_hash"] == m2["config_hash"]);
    CHECK(m1["version"] == std::string(kVersion));

    json other = config;
    other["backend"] = "ngram";
    CHECK(make_manifest("discover", other, 7)["config_hash"] != m1["config_hash"]);
}

TEST_CASE("dot export renders nodes and sign-coded edges") {
    auto model = testing::two_event_model(2);
    auto pair = oracle_pair(model);
    LabeledSequence seq;
    seq.events = {{1.0, 2}, {2.0, 1}};
    seq.labels = {1};
    SamplingConfig cfg;
    cfg.strategy = SamplingStrategy::none;
    ThresholdConfig tcfg;
    tcfg.z_coefficient = 0.0;
    auto result = discover(pair, seq, cfg, tcfg);
    REQUIRE_FALSE(result.per_label[0].edges.empty());
    auto dot = to_dot(result, model.vocab, model.labels, "demo");
    CHECK(dot.find("digraph \"demo\"") == 0);
    CHECK(dot.find("y0 [label=\"y1\"") != std::string::npos);
    CHECK(dot.find("-> y0") != std::string::npos);
    CHECK(dot.find("penwidth=") != std::string::npos);
}
