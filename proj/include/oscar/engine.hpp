#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "oscar/core.hpp"
#include "oscar/density.hpp"
#include "oscar/rng.hpp"

namespace oscar {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class SamplingStrategy { none, permutation, top_k, top_k_nucleus };

inline std::string to_string(SamplingStrategy s) {
    switch (s) {
        case SamplingStrategy::none: return "none";
        case SamplingStrategy::permutation: return "permutation";
        case SamplingStrategy::top_k: return "top_k";
        case SamplingStrategy::top_k_nucleus: return "top_k_nucleus";
    }
    return "none";
}

inline SamplingStrategy parse_strategy(std::string_view name) {
    if (name == "none") return SamplingStrategy::none;
    if (name == "permutation") return SamplingStrategy::permutation;
    if (name == "top_k") return SamplingStrategy::top_k;
    if (name == "top_k_nucleus") return SamplingStrategy::top_k_nucleus;
    throw InvalidModelError("unknown sampling strategy: " + std::string(name));
}

// Particle-sampling knobs. Positions are 1-based over the begin-marker-
// prefixed token list: token 1 is the marker, token s+1 carries the step-s
// event. The context occupies tokens 1..c; tokens 2..c get resampled while
// token 1 stays pinned to the marker.
struct SamplingConfig {
    std::size_t n_particles = 68;
    SamplingStrategy strategy = SamplingStrategy::top_k_nucleus;
    std::size_t top_k = 35;
    double top_p = 0.8;
    std::optional<double> temperature;
    std::size_t context_floor = 1;
    double clamp_epsilon = 1e-6;
    std::uint64_t seed = 0;
};

// Checks the invariants and applies the strategy=none normalization
// (a single particle is forced since resampling is disabled).
inline SamplingConfig validate_sampling_config(SamplingConfig cfg) {
    if (cfg.n_particles < 1) throw InvalidModelError("n_particles must be at least 1");
    if (cfg.context_floor < 1) throw InvalidModelError("context_floor must be at least 1");
    if (cfg.clamp_epsilon <= 0.0 || cfg.clamp_epsilon >= 0.5) {
        throw InvalidModelError("clamp epsilon must lie in (0, 0.5)");
    }
    const bool uses_k = cfg.strategy == SamplingStrategy::top_k ||
                        cfg.strategy == SamplingStrategy::top_k_nucleus;
    if (uses_k && cfg.top_k < 1) throw InvalidModelError("top_k must be at least 1");
    if (cfg.strategy == SamplingStrategy::top_k_nucleus &&
        (cfg.top_p <= 0.0 || cfg.top_p > 1.0)) {
        throw InvalidModelError("top_p must lie in (0, 1]");
    }
    if (cfg.temperature && *cfg.temperature <= 0.0) {
        throw InvalidModelError("temperature must be positive");
    }
    if (cfg.strategy == SamplingStrategy::none) cfg.n_particles = 1;
    return cfg;
}

// Dynamic threshold theta = mean + z_coefficient * sample std (n-1 divisor)
// over one label's CMI values within one sequence.
struct ThresholdConfig {
    double z_coefficient = 2.75;
};

inline ThresholdConfig validate_threshold_config(ThresholdConfig cfg) {
    if (cfg.z_coefficient < 0.0) throw InvalidModelError("z coefficient must be nonnegative");
    return cfg;
}

// ---------------------------------------------------------------------------
// Truncated proposals
// ---------------------------------------------------------------------------

// Rescales probabilities as p^(1/T) (log-probability scaling) and
// renormalizes.
inline std::vector<double> apply_temperature(std::span<const double> probs, double temperature) {
    std::vector<double> out(probs.begin(), probs.end());
    double total = 0.0;
    for (double& p : out) {
        p = p > 0.0 ? std::exp(std::log(p) / temperature) : 0.0;
        total += p;
    }
    if (total <= 0.0) throw InvalidModelError("temperature rescaling emptied the distribution");
    for (double& p : out) p /= total;
    return out;
}

namespace detail {

// Indices sorted by probability descending; ties resolved by index so the
// truncation is deterministic.
inline std::vector<std::size_t> sorted_support(std::span<const double> probs) {
    std::vector<std::size_t> idx(probs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return probs[a] > probs[b];
    });
    return idx;
}

} // namespace detail

// Keeps the k most probable symbols and renormalizes; everything else drops
// to zero.
inline std::vector<double> top_k_truncate(std::span<const double> probs, std::size_t k) {
    if (k < 1) throw InvalidModelError("top_k must be at least 1");
    auto idx = detail::sorted_support(probs);
    std::vector<double> out(probs.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < std::min(k, idx.size()); ++i) {
        out[idx[i]] = probs[idx[i]];
        total += probs[idx[i]];
    }
    if (total <= 0.0) throw InvalidModelError("top-k truncation kept no probability mass");
    for (double& p : out) p /= total;
    return out;
}

// Size of the smallest prefix of a descending-sorted mass vector whose
// cumulative mass exceeds p. At least one entry is always kept; if the total
// never exceeds p the whole vector survives.
inline std::size_t nucleus_prefix_size(std::span<const double> sorted_probs, double p) {
    if (sorted_probs.empty()) throw InvalidModelError("empty distribution");
    double cum = 0.0;
    for (std::size_t i = 0; i < sorted_probs.size(); ++i) {
        cum += sorted_probs[i];
        if (cum > p) return i + 1;
    }
    return sorted_probs.size();
}

namespace detail {

// Builds the per-position proposal a particle draws from: begin-marker mass
// removed, optional temperature, then top-k and nucleus truncation. Nucleus
// walks the raw (untruncated-total) masses of the top-k survivors.
inline std::vector<double> sampling_proposal(const CategoricalDistribution& dist,
                                             const SamplingConfig& cfg) {
    std::vector<double> probs = dist.probs;
    probs[kBeginMarker] = 0.0;
    double total = 0.0;
    for (double p : probs) total += p;
    if (total <= 0.0) throw InvalidModelError("event distribution has no real-event mass");
    for (double& p : probs) p /= total;

    if (cfg.temperature) probs = apply_temperature(probs, *cfg.temperature);

    auto idx = sorted_support(probs);
    std::size_t keep = idx.size();
    if (cfg.strategy == SamplingStrategy::top_k ||
        cfg.strategy == SamplingStrategy::top_k_nucleus) {
        keep = std::min(cfg.top_k, keep);
    }
    if (cfg.strategy == SamplingStrategy::top_k_nucleus) {
        std::vector<double> survivor_probs;
        survivor_probs.reserve(keep);
        for (std::size_t i = 0; i < keep; ++i) survivor_probs.push_back(probs[idx[i]]);
        keep = nucleus_prefix_size(survivor_probs, cfg.top_p);
    }

    std::vector<double> out(probs.size(), 0.0);
    double kept_mass = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
        out[idx[i]] = probs[idx[i]];
        kept_mass += probs[idx[i]];
    }
    if (kept_mass <= 0.0) throw InvalidModelError("truncation kept no probability mass");
    for (double& p : out) p /= kept_mass;
    return out;
}

inline constexpr std::uint64_t kStreamPermutation = 0xA1;
inline constexpr std::uint64_t kStreamDraw = 0xA2;

} // namespace detail

// ---------------------------------------------------------------------------
// Particles
// ---------------------------------------------------------------------------

// N context-resampled variants of one sequence. Every particle keeps the
// source length, pins token 1 to the begin marker, and copies the source
// tokens beyond the context unchanged.
struct ParticleSet {
    std::vector<std::vector<EventIndex>> particles;
    std::size_t context_floor = 1;
};

template <DensityModel M>
ParticleSet sample_particles(const M& pair, const LabeledSequence& seq, SamplingConfig cfg) {
    cfg = validate_sampling_config(cfg);
    const std::size_t length = seq.length();
    if (length < cfg.context_floor + 1) {
        throw ContextTooShortError("sequence length must be at least context_floor + 1");
    }
    const auto tokens = tokens_with_marker(seq);

    ParticleSet set;
    set.context_floor = cfg.context_floor;
    set.particles.assign(cfg.n_particles, tokens);

    switch (cfg.strategy) {
        case SamplingStrategy::none:
            break;
        case SamplingStrategy::permutation: {
            for (std::size_t l = 0; l < cfg.n_particles; ++l) {
                auto rng = RandomStream::derive(cfg.seed, {detail::kStreamPermutation, l});
                auto& particle = set.particles[l];
                // Tokens 2..c, i.e. vector indices 1..c-1.
                rng.shuffle(std::span<EventIndex>(particle.data() + 1, cfg.context_floor - 1));
            }
            break;
        }
        case SamplingStrategy::top_k:
        case SamplingStrategy::top_k_nucleus: {
            // One truncated proposal per context position, shared by all
            // particles; proposals condition on the original prefix.
            for (std::size_t pos = 2; pos <= cfg.context_floor; ++pos) {
                const auto dist = pair.event_distribution(
                    std::span<const EventIndex>(tokens.data(), pos - 1));
                const auto proposal = detail::sampling_proposal(dist, cfg);
                for (std::size_t l = 0; l < cfg.n_particles; ++l) {
                    auto rng = RandomStream::derive(cfg.seed, {detail::kStreamDraw, l, pos});
                    set.particles[l][pos - 1] =
                        static_cast<EventIndex>(rng.next_weighted(proposal));
                }
            }
            break;
        }
    }
    return set;
}

// ---------------------------------------------------------------------------
// Information gain and CMI
// ---------------------------------------------------------------------------

inline double clamp_probability(double p, double eps) {
    return std::min(std::max(p, eps), 1.0 - eps);
}

// KL divergence between Bernoulli(after) and Bernoulli(before), in nats.
// Inputs must already be clamped away from 0 and 1.
inline double bernoulli_kl(double after, double before) {
    return after * std::log(after / before) +
           (1.0 - after) * std::log((1.0 - after) / (1.0 - before));
}

inline double info_gain(const LabelProbabilities& before, const LabelProbabilities& after,
                        LabelIndex label, double eps = 1e-6) {
    if (label >= before.probs.size() || label >= after.probs.size()) {
        throw UnknownSymbolError("label index out of range");
    }
    return bernoulli_kl(clamp_probability(after.probs[label], eps),
                        clamp_probability(before.probs[label], eps));
}

// Per-(position, label) CMI estimates for one sequence. Positions run from
// context_floor + 1 through L + 1 in the 1-based token numbering, so the
// value at position p measures the step-(p-1) event against the prefix that
// precedes it.
struct CmiMatrix {
    std::size_t first_position = 0;
    std::vector<std::vector<double>> values; // [position offset][label]
    std::vector<double> thresholds;          // per label; filled by discover
    double clamp_epsilon = 1e-6;

    std::size_t position_count() const { return values.size(); }
    std::size_t last_position() const { return first_position + values.size() - 1; }

    double at(std::size_t position, LabelIndex label) const {
        if (position < first_position || position > last_position()) {
            throw std::out_of_range("position outside the estimated range");
        }
        return values[position - first_position][label];
    }
};

namespace detail {

struct ParticleStatistics {
    CmiMatrix cmi;
    std::vector<std::vector<double>> indicator_mean; // [position offset][label]
    std::vector<std::vector<double>> indicator_std;
};

// Single pass over particles and positions producing both the CMI estimate
// and the causal-indicator statistics.
template <DensityModel M>
ParticleStatistics particle_statistics(const M& pair, const LabeledSequence& seq,
                                       SamplingConfig cfg) {
    cfg = validate_sampling_config(cfg);
    const ParticleSet set = sample_particles(pair, seq, cfg);
    const std::size_t c = cfg.context_floor;
    const std::size_t token_count = seq.length() + 1;
    const std::size_t positions = token_count - c; // positions c+1 .. L+1
    const std::size_t labels = pair.label_count();
    const std::size_t n = set.particles.size();
    const double eps = cfg.clamp_epsilon;

    std::vector<std::vector<double>> ig_sum(positions, std::vector<double>(labels, 0.0));
    std::vector<std::vector<double>> diff_sum(positions, std::vector<double>(labels, 0.0));
    std::vector<std::vector<double>> diff_sq_sum(positions, std::vector<double>(labels, 0.0));

    std::vector<double> before(labels), after(labels);
    for (const auto& particle : set.particles) {
        auto probs = pair.label_probabilities(
            std::span<const EventIndex>(particle.data(), c));
        for (std::size_t j = 0; j < labels; ++j) before[j] = clamp_probability(probs.probs[j], eps);

        for (std::size_t offset = 0; offset < positions; ++offset) {
            const std::size_t position = c + 1 + offset;
            probs = pair.label_probabilities(
                std::span<const EventIndex>(particle.data(), position));
            for (std::size_t j = 0; j < labels; ++j) {
                after[j] = clamp_probability(probs.probs[j], eps);
                ig_sum[offset][j] += bernoulli_kl(after[j], before[j]);
                const double diff = after[j] - before[j];
                diff_sum[offset][j] += diff;
                diff_sq_sum[offset][j] += diff * diff;
            }
            std::swap(before, after);
        }
    }

    ParticleStatistics stats;
    stats.cmi.first_position = c + 1;
    stats.cmi.clamp_epsilon = eps;
    stats.cmi.values.assign(positions, std::vector<double>(labels, 0.0));
    stats.indicator_mean.assign(positions, std::vector<double>(labels, 0.0));
    stats.indicator_std.assign(positions, std::vector<double>(labels, 0.0));
    const double dn = static_cast<double>(n);
    for (std::size_t offset = 0; offset < positions; ++offset) {
        for (std::size_t j = 0; j < labels; ++j) {
            stats.cmi.values[offset][j] = ig_sum[offset][j] / dn;
            const double mean = diff_sum[offset][j] / dn;
            stats.indicator_mean[offset][j] = mean;
            if (n > 1) {
                const double ss = diff_sq_sum[offset][j] - dn * mean * mean;
                stats.indicator_std[offset][j] = std::sqrt(std::max(0.0, ss / (dn - 1.0)));
            }
        }
    }
    return stats;
}

} // namespace detail

template <DensityModel M>
CmiMatrix estimate_cmi(const M& pair, const LabeledSequence& seq, const SamplingConfig& cfg) {
    return detail::particle_statistics(pair, seq, cfg).cmi;
}

// Particle-averaged change in label probability per position, with its
// sample standard deviation across particles.
struct IndicatorMatrix {
    std::size_t first_position = 0;
    std::vector<std::vector<double>> mean; // [position offset][label]
    std::vector<std::vector<double>> std;  // sample std, 0 for a single particle
};

template <DensityModel M>
IndicatorMatrix causal_indicator(const M& pair, const LabeledSequence& seq,
                                 const SamplingConfig& cfg) {
    auto stats = detail::particle_statistics(pair, seq, cfg);
    IndicatorMatrix out;
    out.first_position = stats.cmi.first_position;
    out.mean = std::move(stats.indicator_mean);
    out.std = std::move(stats.indicator_std);
    return out;
}

// ---------------------------------------------------------------------------
// Dynamic threshold
// ---------------------------------------------------------------------------

struct ThresholdResult {
    double theta = 0.0;
    bool degenerate = false; // fewer than two values: theta falls back to the mean
};

inline ThresholdResult dynamic_threshold(std::span<const double> values,
                                         const ThresholdConfig& cfg) {
    if (values.empty()) throw EmptyInputError("dynamic_threshold needs at least one value");
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    if (values.size() < 2) return ThresholdResult{mean, true};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double stddev = std::sqrt(ss / (n - 1.0));
    return ThresholdResult{mean + cfg.z_coefficient * stddev, false};
}

// ---------------------------------------------------------------------------
// Discovery
// ---------------------------------------------------------------------------

struct DiscoveredEdge {
    std::size_t position = 0; // 1-based token position (context_floor+1 .. L+1)
    std::size_t step = 0;     // = position - 1, the event's step in the sequence
    EventIndex event = 0;
    double cmi = 0.0;
    double indicator_mean = 0.0;
    double indicator_std = 0.0;
};

struct LabelDiscovery {
    std::vector<DiscoveredEdge> edges;
    std::set<EventIndex> event_types; // deduplicated events over retained positions
    double threshold = 0.0;
    bool degenerate_threshold = false;
};

struct DiscoveryResult {
    std::vector<LabelDiscovery> per_label;
    SamplingConfig sampling;
    ThresholdConfig threshold;
    std::size_t sequence_length = 0;
};

// Full pipeline for one sequence: particles -> CMI -> per-label dynamic
// threshold -> retained edges with indicator statistics. A (position, label)
// pair is retained when its CMI reaches the label's threshold and is strictly
// positive; an all-zero CMI row therefore yields an empty boundary.
template <DensityModel M>
DiscoveryResult discover(const M& pair, const LabeledSequence& seq, SamplingConfig sampling_cfg,
                         ThresholdConfig threshold_cfg) {
    sampling_cfg = validate_sampling_config(sampling_cfg);
    threshold_cfg = validate_threshold_config(threshold_cfg);
    auto stats = detail::particle_statistics(pair, seq, sampling_cfg);
    const std::size_t labels = pair.label_count();
    const std::size_t positions = stats.cmi.position_count();

    DiscoveryResult result;
    result.sampling = sampling_cfg;
    result.threshold = threshold_cfg;
    result.sequence_length = seq.length();
    result.per_label.resize(labels);
    stats.cmi.thresholds.resize(labels);

    std::vector<double> column(positions);
    for (std::size_t j = 0; j < labels; ++j) {
        for (std::size_t offset = 0; offset < positions; ++offset) {
            column[offset] = stats.cmi.values[offset][j];
        }
        const auto th = dynamic_threshold(column, threshold_cfg);
        auto& ld = result.per_label[j];
        ld.threshold = th.theta;
        ld.degenerate_threshold = th.degenerate;
        stats.cmi.thresholds[j] = th.theta;

        for (std::size_t offset = 0; offset < positions; ++offset) {
            const double value = column[offset];
            if (value >= th.theta && value > 0.0) {
                const std::size_t position = stats.cmi.first_position + offset;
                DiscoveredEdge edge;
                edge.position = position;
                edge.step = position - 1;
                edge.event = seq.events[edge.step - 1].event;
                edge.cmi = value;
                edge.indicator_mean = stats.indicator_mean[offset][j];
                edge.indicator_std = stats.indicator_std[offset][j];
                ld.event_types.insert(edge.event);
                ld.edges.push_back(edge);
            }
        }
    }
    return result;
}

struct BatchItem {
    bool ok = false;
    DiscoveryResult result;
    std::string error;
};

// Independent per-sequence discovery over a batch. Results match per-item
// discover() calls in input order regardless of the worker count; per-item
// failures are reported without aborting the rest.
template <DensityModel M>
std::vector<BatchItem> discover_batch(const M& pair, std::span<const LabeledSequence> seqs,
                                      const SamplingConfig& sampling_cfg,
                                      const ThresholdConfig& threshold_cfg,
                                      std::size_t parallelism = 1) {
    std::vector<BatchItem> items(seqs.size());
    auto run_one = [&](std::size_t i) {
        try {
            items[i].result = discover(pair, seqs[i], sampling_cfg, threshold_cfg);
            items[i].ok = true;
        } catch (const std::exception& e) {
            items[i].ok = false;
            items[i].error = e.what();
        }
    };

    if (parallelism <= 1 || seqs.size() <= 1) {
        for (std::size_t i = 0; i < seqs.size(); ++i) run_one(i);
        return items;
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < seqs.size(); i = next.fetch_add(1)) {
            run_one(i);
        }
    };
    std::vector<std::thread> pool;
    const std::size_t threads = std::min(parallelism, seqs.size());
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return items;
}

// Builds the exportable causal graph for one sequence's discovery result.
// The label node sits at step L + 1, after the final event.
inline CausalGraph build_causal_graph(const DiscoveryResult& result) {
    CausalGraph graph;
    graph.label_step = result.sequence_length + 1;
    std::map<std::pair<std::size_t, EventIndex>, std::size_t> node_index;
    for (LabelIndex j = 0; j < static_cast<LabelIndex>(result.per_label.size()); ++j) {
        const auto& ld = result.per_label[j];
        if (!ld.edges.empty()) graph.label_nodes.push_back(j);
        for (const auto& edge : ld.edges) {
            auto key = std::make_pair(edge.step, edge.event);
            auto it = node_index.find(key);
            if (it == node_index.end()) {
                it = node_index.emplace(key, graph.event_nodes.size()).first;
                graph.event_nodes.push_back(CausalGraph::EventNode{edge.step, edge.event});
            }
            graph.edges.push_back(CausalGraph::Edge{it->second, j, edge.cmi,
                                                    edge.indicator_mean, edge.indicator_std});
        }
    }
    return graph;
}

} // namespace oscar
