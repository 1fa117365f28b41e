#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "oscar/engine.hpp"

#include "test_support.hpp"

using namespace oscar;

namespace {

LabeledSequence make_sequence(std::initializer_list<EventIndex> events) {
    LabeledSequence seq;
    double t = 0.0;
    for (EventIndex e : events) seq.events.push_back(TimedEvent{t += 1.0, e});
    return seq;
}

SamplingConfig single_particle_config(std::size_t context_floor = 1) {
    SamplingConfig cfg;
    cfg.strategy = SamplingStrategy::none;
    cfg.n_particles = 1;
    cfg.context_floor = context_floor;
    cfg.seed = 17;
    return cfg;
}

} // namespace

TEST_CASE("config validation") {
    SamplingConfig cfg;
    cfg.strategy = SamplingStrategy::none;
    cfg.n_particles = 64;
    CHECK(validate_sampling_config(cfg).n_particles == 1); // forced for strategy none

    cfg = SamplingConfig{};
    cfg.top_k = 0;
    CHECK_THROWS_AS(validate_sampling_config(cfg), InvalidModelError);

    cfg = SamplingConfig{};
    cfg.top_p = 0.0;
    CHECK_THROWS_AS(validate_sampling_config(cfg), InvalidModelError);

    cfg = SamplingConfig{};
    cfg.context_floor = 0;
    CHECK_THROWS_AS(validate_sampling_config(cfg), InvalidModelError);

    cfg = SamplingConfig{};
    cfg.temperature = -1.0;
    CHECK_THROWS_AS(validate_sampling_config(cfg), InvalidModelError);

    ThresholdConfig tc;
    tc.z_coefficient = -0.5;
    CHECK_THROWS_AS(validate_threshold_config(tc), InvalidModelError);
}

TEST_CASE("top-k truncation renormalizes the survivors") {
    const std::vector<double> probs = {0.5, 0.3, 0.1, 0.1};
    auto rounded = top_k_truncate(probs, 2);
    CHECK(rounded[0] == Catch::Approx(0.625).margin(1e-12));
    CHECK(rounded[1] == Catch::Approx(0.375).margin(1e-12));
    CHECK(rounded[2] == 0.0);
    CHECK(rounded[3] == 0.0);

    // k beyond the support keeps everything.
    auto full = top_k_truncate(probs, 10);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        CHECK(full[i] == Catch::Approx(probs[i]).margin(1e-12));
    }
}

TEST_CASE("nucleus truncation keeps the smallest mass-exceeding prefix") {
    const std::vector<double> sorted = {0.9, 0.1};
    CHECK(nucleus_prefix_size(sorted, 0.8) == 1);

    const std::vector<double> spread = {0.4, 0.3, 0.2, 0.1};
    CHECK(nucleus_prefix_size(spread, 0.8) == 3); // 0.4+0.3 = 0.7, +0.2 crosses
    CHECK(nucleus_prefix_size(spread, 1.0) == 4); // never exceeds 1: keep all
}

TEST_CASE("truncation is monotone and never empties the support") {
    RandomStream rng = RandomStream::derive(3, {9});
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + rng.next_below(12);
        std::vector<double> probs(n);
        double total = 0.0;
        for (double& p : probs) total += (p = 0.01 + rng.next_unit());
        for (double& p : probs) p /= total;

        const std::size_t k1 = 1 + rng.next_below(n);
        const std::size_t k2 = k1 + rng.next_below(n - k1 + 1);
        auto t1 = top_k_truncate(probs, k1);
        auto t2 = top_k_truncate(probs, k2);
        for (std::size_t i = 0; i < n; ++i) {
            if (t1[i] > 0.0) CHECK(t2[i] > 0.0); // k2 >= k1 keeps a superset
        }

        std::vector<double> sorted = probs;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        const double p1 = rng.next_unit();
        const double p2 = p1 + (1.0 - p1) * rng.next_unit();
        const std::size_t n1 = nucleus_prefix_size(sorted, p1);
        const std::size_t n2 = nucleus_prefix_size(sorted, p2);
        CHECK(n1 >= 1);
        CHECK(n2 >= n1); // larger mass keeps a superset
    }
}

TEST_CASE("wide-open truncation reproduces the model distribution") {
    // k at least the vocabulary size together with p = 1 must leave the
    // (marker-stripped) model distribution untouched.
    CategoricalDistribution dist{{0.0, 0.4, 0.3, 0.2, 0.1}};
    SamplingConfig cfg;
    cfg.strategy = SamplingStrategy::top_k_nucleus;
    cfg.top_k = 35;
    cfg.top_p = 1.0;
    auto proposal = detail::sampling_proposal(dist, cfg);
    for (std::size_t i = 0; i < dist.probs.size(); ++i) {
        CHECK(proposal[i] == Catch::Approx(dist.probs[i]).margin(1e-12));
    }

    // Leftover marker mass is stripped and renormalized before truncation.
    CategoricalDistribution leaky{{0.2, 0.4, 0.4}};
    auto cleaned = detail::sampling_proposal(leaky, cfg);
    CHECK(cleaned[0] == 0.0);
    CHECK(cleaned[1] == Catch::Approx(0.5).margin(1e-12));
    CHECK(cleaned[2] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("information gain closed forms") {
    const double eps = 1e-6;
    LabelProbabilities before{{0.3}};
    LabelProbabilities after{{0.3}};
    CHECK(info_gain(before, after, 0, eps) == 0.0);

    // Independent closed-form evaluations of the Bernoulli KL.
    const double kl_09_05 = 0.9 * std::log(1.8) + 0.1 * std::log(0.2);
    CHECK(info_gain(LabelProbabilities{{0.5}}, LabelProbabilities{{0.9}}, 0, eps) ==
          Catch::Approx(kl_09_05).margin(1e-12));
    CHECK(kl_09_05 == Catch::Approx(0.368064).margin(1e-6));

    const double kl_05_075 = 0.5 * std::log(4.0 / 3.0);
    CHECK(info_gain(LabelProbabilities{{0.75}}, LabelProbabilities{{0.5}}, 0, eps) ==
          Catch::Approx(kl_05_075).margin(1e-12));
    CHECK(kl_05_075 == Catch::Approx(0.143841).margin(1e-6));
}

TEST_CASE("information gain respects the clamp cap") {
    const double eps = 1e-6;
    const double cap = std::log((1.0 - eps) / eps);
    RandomStream rng = RandomStream::derive(21, {0});
    for (int trial = 0; trial < 1000; ++trial) {
        LabelProbabilities before{{rng.next_unit()}};
        LabelProbabilities after{{rng.next_unit()}};
        const double ig = info_gain(before, after, 0, eps);
        CHECK(ig >= 0.0);
        CHECK(ig <= cap + 1e-9);
    }
    // The extreme case actually approaches the cap.
    const double extreme = info_gain(LabelProbabilities{{0.0}}, LabelProbabilities{{1.0}}, 0, eps);
    CHECK(extreme == Catch::Approx((1.0 - 2.0 * eps) * cap).margin(1e-9));
}

TEST_CASE("particles pin the marker and preserve the suffix") {
    auto model = testing::uniform_model(4, 6, {LabelRule{0, {{Literal{1, false}}}}});
    auto pair = oracle_pair(model);
    auto seq = make_sequence({2, 3, 1, 4, 2, 1});

    SamplingConfig cfg;
    cfg.n_particles = 16;
    cfg.context_floor = 3;
    cfg.seed = 5;
    auto set = sample_particles(pair, seq, cfg);
    REQUIRE(set.particles.size() == 16);
    const auto original = tokens_with_marker(seq);
    for (const auto& particle : set.particles) {
        REQUIRE(particle.size() == original.size());
        CHECK(particle[0] == kBeginMarker);
        for (std::size_t i = cfg.context_floor; i < original.size(); ++i) {
            CHECK(particle[i] == original[i]); // tokens beyond the context stay put
        }
        for (std::size_t i = 1; i < cfg.context_floor; ++i) {
            CHECK(particle[i] != kBeginMarker); // resampled tokens are real events
        }
    }

    auto again = sample_particles(pair, seq, cfg);
    CHECK(again.particles == set.particles);

    cfg.seed = 6;
    auto shifted = sample_particles(pair, seq, cfg);
    CHECK(shifted.particles != set.particles);
}

TEST_CASE("permutation strategy shuffles the original context tokens") {
    auto model = testing::uniform_model(5, 6, {LabelRule{0, {{Literal{1, false}}}}});
    auto pair = oracle_pair(model);
    auto seq = make_sequence({2, 3, 4, 5, 1, 2});

    SamplingConfig cfg;
    cfg.strategy = SamplingStrategy::permutation;
    cfg.n_particles = 32;
    cfg.context_floor = 4;
    cfg.seed = 11;
    auto set = sample_particles(pair, seq, cfg);
    const auto original = tokens_with_marker(seq);
    std::vector<EventIndex> context(original.begin() + 1, original.begin() + 4);
    std::sort(context.begin(), context.end());
    for (const auto& particle : set.particles) {
        std::vector<EventIndex> got(particle.begin() + 1, particle.begin() + 4);
        std::sort(got.begin(), got.end());
        CHECK(got == context); // same multiset, order varies
    }
}

TEST_CASE("strategy none with a short sequence raises ContextTooShort") {
    auto model = testing::two_event_model(2);
    auto pair = oracle_pair(model);
    auto seq = make_sequence({1});
    CHECK_THROWS_AS(sample_particles(pair, seq, single_particle_config(1)), ContextTooShortError);
}

TEST_CASE("single-particle CMI reduces to one information gain") {
    auto model = testing::two_event_model(2);
    auto pair = oracle_pair(model);
    auto seq = make_sequence({2, 2}); // first event x2, the rule variable is x1

    auto cmi = estimate_cmi(pair, seq, single_particle_config(1));
    CHECK(cmi.first_position == 2);
    CHECK(cmi.last_position() == 3);

    // Position 2 carries the first event against the marker-only prefix:
    // KL(Bernoulli(0.5) || Bernoulli(0.75)).
    const double expected = 0.5 * std::log(4.0 / 3.0);
    CHECK(cmi.at(2, 0) == Catch::Approx(expected).margin(1e-9));
    CHECK(cmi.at(2, 0) == Catch::Approx(0.143841).margin(1e-6));

    // Position 3: the second x2 settles the label at 0, clamped to eps.
    const double eps = 1e-6;
    const double settled = bernoulli_kl(eps, 0.5);
    CHECK(cmi.at(3, 0) == Catch::Approx(settled).margin(1e-9));
}

TEST_CASE("conditionally independent pairs carry exactly zero CMI") {
    // Once the rule is settled by the prefix, later events cannot move the
    // conditional; a coin label is independent of every event.
    GeneratorModel model = testing::uniform_model(3, 5, {LabelRule{0, {{Literal{1, false}}}}});
    model.labels = LabelCatalog({"y1", "coin"});
    model.ruleless = {RulelessLabel{1, 0.3}};
    auto pair = oracle_pair(model);
    // x1 sits at step 2, inside the preserved suffix, so every particle has
    // the rule settled from position 4 onward.
    auto seq = make_sequence({2, 1, 3, 2, 3});

    SamplingConfig cfg;
    cfg.n_particles = 8;
    cfg.context_floor = 2;
    cfg.seed = 23;
    auto cmi = estimate_cmi(pair, seq, cfg);
    for (std::size_t p = cmi.first_position; p <= cmi.last_position(); ++p) {
        if (p >= 4) CHECK(std::abs(cmi.at(p, 0)) <= 1e-12); // settled rule
        CHECK(std::abs(cmi.at(p, 1)) <= 1e-12);             // independent coin
    }

    // Events outside the rule's variable set still move the conditional on a
    // short horizon (one fewer chance for x1 to appear), so their CMI is
    // positive until the label's fate is sealed.
    auto unsettled = make_sequence({2, 3, 2, 3, 2});
    auto drift = estimate_cmi(pair, unsettled, cfg);
    CHECK(drift.at(4, 0) > 0.0);
}

TEST_CASE("CMI values are nonnegative and indicators stay in range") {
    auto model = testing::uniform_model(4, 6,
                                        {LabelRule{0, {{Literal{1, false}, Literal{2, true}}}}});
    auto pair = oracle_pair(model);
    auto seqs = sample_dataset(model, 10);
    SamplingConfig cfg;
    cfg.n_particles = 12;
    cfg.context_floor = 3;
    cfg.seed = 31;
    for (const auto& seq : seqs) {
        auto cmi = estimate_cmi(pair, seq, cfg);
        auto ind = causal_indicator(pair, seq, cfg);
        for (std::size_t p = cmi.first_position; p <= cmi.last_position(); ++p) {
            CHECK(cmi.at(p, 0) >= -1e-12);
            const double mean = ind.mean[p - ind.first_position][0];
            CHECK(mean >= -1.0);
            CHECK(mean <= 1.0);
            CHECK(ind.std[p - ind.first_position][0] >= 0.0);
        }
    }
}

TEST_CASE("dynamic threshold closed forms") {
    ThresholdConfig cfg;
    cfg.z_coefficient = 2.75;
    const std::vector<double> values = {0.1, 0.2, 0.3};
    auto th = dynamic_threshold(values, cfg);
    CHECK_FALSE(th.degenerate);
    CHECK(th.theta == Catch::Approx(0.475).margin(1e-12));

    const std::vector<double> constant = {0.4, 0.4, 0.4, 0.4};
    CHECK(dynamic_threshold(constant, cfg).theta == Catch::Approx(0.4).margin(1e-12));

    ThresholdConfig zero;
    zero.z_coefficient = 0.0;
    CHECK(dynamic_threshold(values, zero).theta == Catch::Approx(0.2).margin(1e-12));

    const std::vector<double> lone = {0.7};
    auto degenerate = dynamic_threshold(lone, cfg);
    CHECK(degenerate.degenerate);
    CHECK(degenerate.theta == Catch::Approx(0.7).margin(1e-12));
}

TEST_CASE("dynamic threshold matches an independent mean/std implementation") {
    RandomStream rng = RandomStream::derive(8, {1});
    ThresholdConfig cfg;
    for (int trial = 0; trial < 1000; ++trial) {
        cfg.z_coefficient = 3.0 * rng.next_unit();
        const std::size_t n = 2 + rng.next_below(30);
        std::vector<double> values(n);
        for (double& v : values) v = rng.next_unit() * 10.0;

        // Welford's online algorithm as the second route.
        double mean = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double delta = values[i] - mean;
            mean += delta / static_cast<double>(i + 1);
            m2 += delta * (values[i] - mean);
        }
        const double expected = mean + cfg.z_coefficient * std::sqrt(m2 / static_cast<double>(n - 1));
        CHECK(dynamic_threshold(values, cfg).theta == Catch::Approx(expected).margin(1e-12));
    }
}

TEST_CASE("causal indicator statistics") {
    auto model = testing::two_event_model(2);
    auto pair = oracle_pair(model);

    // Observing the rule variable after [BOS, x2] lifts the label probability
    // from 0.5 to 1 (clamped).
    auto seq = make_sequence({2, 1});
    auto ind = causal_indicator(pair, seq, single_particle_config(1));
    CHECK(ind.first_position == 2);
    CHECK(ind.mean[1][0] == Catch::Approx(0.5).margin(1e-5));
    CHECK(ind.std[1][0] == 0.0); // single particle

    // An event that cannot change the conditional leaves the indicator at 0.
    auto flat_model = testing::uniform_model(3, 3, {LabelRule{0, {{Literal{1, false}}}}});
    auto flat_pair = oracle_pair(flat_model);
    auto flat_seq = make_sequence({1, 2, 3}); // once x1 is seen the label is settled
    auto flat = causal_indicator(flat_pair, flat_seq, single_particle_config(1));
    CHECK(std::abs(flat.mean[1][0]) <= 1e-6); // x2 after x1: still certain
    CHECK(std::abs(flat.mean[2][0]) <= 1e-6);
}

TEST_CASE("inhibitory literals drive the indicator negative") {
    auto model = testing::uniform_model(2, 2, {LabelRule{0, {{Literal{1, true}}}}});
    auto pair = oracle_pair(model);
    auto seq = make_sequence({1, 2}); // observing x1 kills the "no x1" label
    auto ind = causal_indicator(pair, seq, single_particle_config(1));
    // Before: P(no x1 in 2 uniform steps) = 0.25; after observing x1: 0.
    CHECK(ind.mean[0][0] == Catch::Approx(-0.25).margin(1e-5));
}

TEST_CASE("discovery on a sequence without rule variables yields empty boundaries") {
    auto model = testing::uniform_model(3, 5, {LabelRule{0, {{Literal{1, false}}}}});
    auto pair = oracle_pair(model);
    auto seq = make_sequence({2, 3, 3, 2, 3});

    SamplingConfig scfg;
    scfg.n_particles = 16;
    scfg.context_floor = 2;
    scfg.seed = 9;
    auto result = discover(pair, seq, scfg, ThresholdConfig{});
    CHECK(result.per_label[0].edges.empty());
    CHECK(result.per_label[0].event_types.empty());
}

TEST_CASE("discovery is deterministic and respects the retained-edge invariant") {
    auto model = testing::uniform_model(4, 10,
                                        {LabelRule{0, {{Literal{1, false}}, {Literal{2, false}}}}});
    auto pair = oracle_pair(model);
    auto seqs = sample_dataset(model, 6);

    SamplingConfig scfg;
    scfg.n_particles = 32;
    scfg.context_floor = 3;
    scfg.seed = 41;
    ThresholdConfig tcfg;

    for (const auto& seq : seqs) {
        auto a = discover(pair, seq, scfg, tcfg);
        auto b = discover(pair, seq, scfg, tcfg);
        REQUIRE(a.per_label.size() == b.per_label.size());
        for (std::size_t j = 0; j < a.per_label.size(); ++j) {
            CHECK(a.per_label[j].threshold == b.per_label[j].threshold);
            REQUIRE(a.per_label[j].edges.size() == b.per_label[j].edges.size());
            for (std::size_t e = 0; e < a.per_label[j].edges.size(); ++e) {
                const auto& ea = a.per_label[j].edges[e];
                CHECK(ea.cmi == b.per_label[j].edges[e].cmi);
                CHECK(ea.cmi >= a.per_label[j].threshold);
                CHECK(ea.cmi > 0.0);
                CHECK(ea.position >= scfg.context_floor + 1);
                CHECK(ea.step == ea.position - 1);
                CHECK(ea.event == seq.events[ea.step - 1].event);
            }
        }
    }
}

TEST_CASE("batch discovery equals per-item discovery in any order and worker count") {
    auto model = testing::uniform_model(4, 10, {LabelRule{0, {{Literal{1, false}}}}});
    auto pair = oracle_pair(model);
    auto seqs = sample_dataset(model, 12);

    SamplingConfig scfg;
    scfg.n_particles = 16;
    scfg.context_floor = 3;
    scfg.seed = 13;
    ThresholdConfig tcfg;

    auto summary = [](const DiscoveryResult& r) {
        std::vector<std::tuple<std::size_t, EventIndex, double>> edges;
        for (const auto& ld : r.per_label) {
            for (const auto& e : ld.edges) edges.emplace_back(e.position, e.event, e.cmi);
        }
        return edges;
    };

    auto serial = discover_batch(pair, seqs, scfg, tcfg, 1);
    auto parallel = discover_batch(pair, seqs, scfg, tcfg, 4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        REQUIRE(serial[i].ok);
        REQUIRE(parallel[i].ok);
        CHECK(summary(serial[i].result) == summary(parallel[i].result));
        auto solo = discover(pair, seqs[i], scfg, tcfg);
        CHECK(summary(serial[i].result) == summary(solo));
    }

    // Reversing the input reverses the outputs item-for-item.
    std::vector<LabeledSequence> reversed(seqs.rbegin(), seqs.rend());
    auto rev = discover_batch(pair, reversed, scfg, tcfg, 3);
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        CHECK(summary(rev[i].result) == summary(serial[seqs.size() - 1 - i].result));
    }

    // A batch of one behaves exactly like discover().
    std::vector<LabeledSequence> one = {seqs[0]};
    auto single = discover_batch(pair, one, scfg, tcfg, 8);
    CHECK(summary(single[0].result) == summary(serial[0].result));
}

TEST_CASE("batch items fail independently") {
    auto model = testing::uniform_model(3, 6, {LabelRule{0, {{Literal{1, false}}}}});
    auto pair = oracle_pair(model);
    auto good = sample_dataset(model, 3);
    std::vector<LabeledSequence> seqs = {good[0], make_sequence({1}), good[1]};

    SamplingConfig scfg;
    scfg.n_particles = 4;
    scfg.context_floor = 2;
    scfg.seed = 3;
    auto items = discover_batch(pair, seqs, scfg, ThresholdConfig{}, 2);
    CHECK(items[0].ok);
    CHECK_FALSE(items[1].ok); // too short for the context floor
    CHECK(!items[1].error.empty());
    CHECK(items[2].ok);
}

TEST_CASE("causal graph honors temporal precedence") {
    auto model = testing::uniform_model(3, 12, {LabelRule{0, {{Literal{1, false}}}}});
    auto pair = oracle_pair(model);
    auto seqs = sample_dataset(model, 5);
    SamplingConfig scfg;
    scfg.n_particles = 24;
    scfg.context_floor = 2;
    scfg.seed = 77;
    for (const auto& seq : seqs) {
        auto result = discover(pair, seq, scfg, ThresholdConfig{});
        auto graph = build_causal_graph(result);
        CHECK(graph.label_step == seq.length() + 1);
        for (const auto& edge : graph.edges) {
            CHECK(graph.event_nodes[edge.source].step < graph.label_step);
            CHECK(edge.cmi > 0.0);
        }
    }
}
