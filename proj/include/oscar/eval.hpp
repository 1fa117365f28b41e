#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "oscar/core.hpp"

namespace oscar {

struct SetScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t true_positives = 0;
    std::size_t inferred_size = 0;
    std::size_t truth_size = 0;
};

// Precision/recall/F1 of an inferred event-type set against the ground-truth
// Markov Boundary. Empty inference scores (0, 0, 0).
inline SetScore score_mb(const std::set<EventIndex>& inferred, const std::set<EventIndex>& truth) {
    if (truth.empty()) throw EmptyInputError("score_mb requires a nonempty ground-truth set");
    SetScore s;
    s.inferred_size = inferred.size();
    s.truth_size = truth.size();
    for (EventIndex e : inferred) {
        if (truth.count(e)) ++s.true_positives;
    }
    s.precision = inferred.empty()
                      ? 0.0
                      : static_cast<double>(s.true_positives) / static_cast<double>(inferred.size());
    s.recall = static_cast<double>(s.true_positives) / static_cast<double>(truth.size());
    s.f1 = (s.precision + s.recall) == 0.0
               ? 0.0
               : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

// One scored (sequence, label) instance.
struct MbScore {
    std::size_t sequence = 0;
    LabelIndex label = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t true_positives = 0;
    std::size_t inferred_size = 0;
    std::size_t truth_size = 0;
    bool label_true_in_sequence = false;
    bool ground_truth_available = false;
};

inline MbScore make_mb_score(std::size_t sequence, LabelIndex label,
                             const std::set<EventIndex>& inferred,
                             const std::set<EventIndex>& truth, bool label_true) {
    MbScore m;
    m.sequence = sequence;
    m.label = label;
    m.label_true_in_sequence = label_true;
    m.ground_truth_available = !truth.empty();
    if (m.ground_truth_available) {
        const SetScore s = score_mb(inferred, truth);
        m.precision = s.precision;
        m.recall = s.recall;
        m.f1 = s.f1;
        m.true_positives = s.true_positives;
        m.inferred_size = s.inferred_size;
        m.truth_size = s.truth_size;
    }
    return m;
}

struct AggregateMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct LengthStratum {
    AggregateMetrics mean;
    std::size_t count = 0;
};

struct AggregateReport {
    AggregateMetrics micro;
    AggregateMetrics macro;
    AggregateMetrics weighted;
    std::map<std::size_t, LengthStratum> by_mb_length;
    std::vector<std::uint64_t> label_support; // positive instances per label
    std::size_t scored_instances = 0;
    std::size_t skipped_no_truth = 0;     // instances without ground truth
    std::size_t skipped_label_false = 0;  // instances where the label was absent
    double runtime_seconds = 0.0;
};

namespace detail {

// Instances that enter the averages: ground truth known and label attached
// to the sequence. Labels without rules are counted separately as coverage.
inline bool scored(const MbScore& m) {
    return m.ground_truth_available && m.label_true_in_sequence;
}

} // namespace detail

// Micro pools the confusion counts over all scored instances; macro averages
// per-label means with equal weight; weighted weights per-label means by
// label support (positive instance count).
inline AggregateReport aggregate(std::span<const MbScore> scores, const MarkovBoundarySet& truth,
                                 std::vector<std::uint64_t> supports = {}) {
    if (scores.empty()) throw EmptyInputError("aggregate needs at least one score");
    const std::size_t label_count = truth.label_count();

    AggregateReport rep;
    rep.label_support.assign(label_count, 0);

    std::vector<AggregateMetrics> label_sum(label_count);
    std::vector<std::size_t> label_n(label_count, 0);
    std::uint64_t tp = 0, inferred = 0, truth_total = 0;

    for (const auto& m : scores) {
        if (!m.ground_truth_available) {
            ++rep.skipped_no_truth;
            continue;
        }
        if (!m.label_true_in_sequence) {
            ++rep.skipped_label_false;
            continue;
        }
        ++rep.scored_instances;
        ++rep.label_support[m.label];
        label_sum[m.label].precision += m.precision;
        label_sum[m.label].recall += m.recall;
        label_sum[m.label].f1 += m.f1;
        ++label_n[m.label];
        tp += m.true_positives;
        inferred += m.inferred_size;
        truth_total += m.truth_size;
    }
    if (rep.scored_instances == 0) {
        throw EmptyInputError("no instance had both ground truth and a positive label");
    }

    rep.micro.precision = inferred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(inferred);
    rep.micro.recall = truth_total == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(truth_total);
    rep.micro.f1 = (rep.micro.precision + rep.micro.recall) == 0.0
                       ? 0.0
                       : 2.0 * rep.micro.precision * rep.micro.recall /
                             (rep.micro.precision + rep.micro.recall);

    if (supports.empty()) supports = rep.label_support;
    double weight_total = 0.0;
    std::size_t labels_with_data = 0;
    for (std::size_t j = 0; j < label_count; ++j) {
        if (label_n[j] == 0) continue;
        const double n = static_cast<double>(label_n[j]);
        const AggregateMetrics mean{label_sum[j].precision / n, label_sum[j].recall / n,
                                    label_sum[j].f1 / n};
        ++labels_with_data;
        rep.macro.precision += mean.precision;
        rep.macro.recall += mean.recall;
        rep.macro.f1 += mean.f1;
        const double w = static_cast<double>(supports[j]);
        weight_total += w;
        rep.weighted.precision += w * mean.precision;
        rep.weighted.recall += w * mean.recall;
        rep.weighted.f1 += w * mean.f1;
    }
    rep.macro.precision /= static_cast<double>(labels_with_data);
    rep.macro.recall /= static_cast<double>(labels_with_data);
    rep.macro.f1 /= static_cast<double>(labels_with_data);
    if (weight_total > 0.0) {
        rep.weighted.precision /= weight_total;
        rep.weighted.recall /= weight_total;
        rep.weighted.f1 /= weight_total;
    }
    return rep;
}

// Buckets scored instances by the ground-truth boundary size of their label.
inline std::map<std::size_t, LengthStratum> stratify_by_mb_length(
    std::span<const MbScore> scores, const MarkovBoundarySet& truth) {
    std::map<std::size_t, LengthStratum> strata;
    for (const auto& m : scores) {
        if (!detail::scored(m)) continue;
        const std::size_t len = truth.per_label[m.label].size();
        auto& st = strata[len];
        st.mean.precision += m.precision;
        st.mean.recall += m.recall;
        st.mean.f1 += m.f1;
        ++st.count;
    }
    for (auto& [len, st] : strata) {
        const double n = static_cast<double>(st.count);
        st.mean.precision /= n;
        st.mean.recall /= n;
        st.mean.f1 /= n;
    }
    return strata;
}

} // namespace oscar
