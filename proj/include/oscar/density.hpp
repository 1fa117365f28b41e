#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "oscar/core.hpp"
#include "oscar/synthgen.hpp"

namespace oscar {

// Anything that can answer next-event and label conditionals for a
// begin-marker-prefixed token list. Queries must be pure and safe to issue
// from many threads at once.
template <typename M>
concept DensityModel = requires(const M& m, std::span<const EventIndex> prefix) {
    { m.event_distribution(prefix) } -> std::convertible_to<CategoricalDistribution>;
    { m.label_probabilities(prefix) } -> std::convertible_to<LabelProbabilities>;
    { m.vocab_size() } -> std::convertible_to<std::size_t>;
    { m.label_count() } -> std::convertible_to<std::size_t>;
};

struct EstimatorMetadata {
    std::string backend;
    std::size_t corpus_sequences = 0;
    std::size_t corpus_tokens = 0;
    std::vector<std::uint64_t> label_support; // positive count per label
};

namespace detail {

inline void check_query_prefix(std::span<const EventIndex> prefix, std::size_t vocab_size) {
    if (prefix.empty() || prefix[0] != kBeginMarker) {
        throw InvalidModelError("query prefix must start with the begin marker");
    }
    for (std::size_t i = 1; i < prefix.size(); ++i) {
        if (prefix[i] >= vocab_size) throw UnknownSymbolError("prefix event out of range");
        if (prefix[i] == kBeginMarker) {
            throw InvalidModelError("begin marker may not appear mid-prefix");
        }
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Exact oracle backend
// ---------------------------------------------------------------------------

// Delegates every query to the generator's enumeration tables, realizing a
// density estimator whose conditionals equal the true generating
// distribution. Tables are built eagerly so queries are const and lock-free.
class OracleEstimator {
public:
    explicit OracleEstimator(GeneratorModel model,
                             double enumeration_budget = kDefaultEnumerationBudget)
        : model_(std::move(model)) {
        validate_generator_model(model_);
        detail::check_budget(model_, 0, enumeration_budget);
        tables_.reserve(model_.labels.size());
        for (LabelIndex j = 0; j < model_.labels.size(); ++j) {
            tables_.emplace_back(model_, j);
        }
    }

    CategoricalDistribution event_distribution(std::span<const EventIndex> prefix) const {
        return exact_next_event(model_, prefix);
    }

    LabelProbabilities label_probabilities(std::span<const EventIndex> prefix) const {
        detail::check_prefix(model_, prefix);
        LabelProbabilities out;
        out.probs.reserve(tables_.size());
        for (const auto& table : tables_) out.probs.push_back(table.query(prefix));
        return out;
    }

    std::size_t vocab_size() const { return model_.vocab.size(); }
    std::size_t label_count() const { return model_.labels.size(); }
    const GeneratorModel& model() const { return model_; }

private:
    GeneratorModel model_;
    std::vector<LabelConditionalTable> tables_;
};

// ---------------------------------------------------------------------------
// Count-based n-gram backend
// ---------------------------------------------------------------------------

// Additive-smoothed conditional frequencies. The event model conditions on
// the last (order-1) tokens; the label model on the presence signature of the
// last `order` events, backing off to the marginal label frequency for unseen
// signatures. Tables are immutable after fit.
class NGramEstimator {
public:
    using Signature = std::vector<EventIndex>;

    NGramEstimator(std::size_t vocab_size, std::size_t label_count, std::size_t order,
                   double alpha)
        : vocab_size_(vocab_size),
          label_count_(label_count),
          order_(order),
          alpha_(alpha),
          label_marginal_pos_(label_count, 0) {
        if (order_ < 1) throw InvalidModelError("n-gram order must be at least 1");
        if (alpha_ <= 0.0) throw InvalidModelError("smoothing alpha must be positive");
    }

    static NGramEstimator fit(std::span<const LabeledSequence> corpus, std::size_t vocab_size,
                              std::size_t label_count, std::size_t order, double alpha) {
        if (corpus.empty()) throw EmptyCorpusError("cannot fit an n-gram on an empty corpus");
        NGramEstimator est(vocab_size, label_count, order, alpha);
        for (const auto& seq : corpus) est.absorb(seq);
        est.sequences_ = corpus.size();
        return est;
    }

    CategoricalDistribution event_distribution(std::span<const EventIndex> prefix) const {
        detail::check_query_prefix(prefix, vocab_size_);
        CategoricalDistribution dist;
        dist.probs.assign(vocab_size_, 0.0);
        const auto it = event_rows_.find(context_of(prefix));
        const std::vector<std::uint64_t>* row = it == event_rows_.end() ? nullptr : &it->second;
        double total = 0.0;
        if (row != nullptr) {
            for (std::uint64_t c : *row) total += static_cast<double>(c);
        }
        const double denom = total + alpha_ * static_cast<double>(vocab_size_);
        for (std::size_t x = 0; x < vocab_size_; ++x) {
            const double c = row != nullptr ? static_cast<double>((*row)[x]) : 0.0;
            dist.probs[x] = (c + alpha_) / denom;
        }
        return dist;
    }

    LabelProbabilities label_probabilities(std::span<const EventIndex> prefix) const {
        detail::check_query_prefix(prefix, vocab_size_);
        LabelProbabilities out;
        out.probs.resize(label_count_);
        const auto it = label_rows_.find(signature_of(prefix));
        for (std::size_t j = 0; j < label_count_; ++j) {
            if (it != label_rows_.end()) {
                const auto& cell = it->second;
                out.probs[j] = (static_cast<double>(cell.positives[j]) + alpha_) /
                               (static_cast<double>(cell.total) + 2.0 * alpha_);
            } else {
                out.probs[j] = (static_cast<double>(label_marginal_pos_[j]) + alpha_) /
                               (static_cast<double>(label_marginal_total_) + 2.0 * alpha_);
            }
        }
        return out;
    }

    std::size_t vocab_size() const { return vocab_size_; }
    std::size_t label_count() const { return label_count_; }
    std::size_t order() const { return order_; }
    double alpha() const { return alpha_; }

    EstimatorMetadata metadata() const {
        EstimatorMetadata md;
        md.backend = "ngram";
        md.corpus_sequences = sequences_;
        md.corpus_tokens = tokens_;
        md.label_support.assign(label_marginal_pos_.begin(), label_marginal_pos_.end());
        return md;
    }

    // Exposed for serialization and round-trip checks.
    struct LabelCell {
        std::uint64_t total = 0;
        std::vector<std::uint64_t> positives;

        bool operator==(const LabelCell&) const = default;
    };
    using EventRows = std::map<std::vector<EventIndex>, std::vector<std::uint64_t>>;
    using LabelRows = std::map<Signature, LabelCell>;

    const EventRows& event_rows() const { return event_rows_; }
    const LabelRows& label_rows() const { return label_rows_; }
    std::uint64_t label_marginal_total() const { return label_marginal_total_; }
    const std::vector<std::uint64_t>& label_marginal_positives() const {
        return label_marginal_pos_;
    }
    std::size_t sequences() const { return sequences_; }
    std::size_t tokens() const { return tokens_; }

    void restore_counts(EventRows event_rows, LabelRows label_rows,
                        std::vector<std::uint64_t> marginal_pos, std::uint64_t marginal_total,
                        std::size_t sequences, std::size_t tokens) {
        event_rows_ = std::move(event_rows);
        label_rows_ = std::move(label_rows);
        label_marginal_pos_ = std::move(marginal_pos);
        label_marginal_total_ = marginal_total;
        sequences_ = sequences;
        tokens_ = tokens;
    }

    bool operator==(const NGramEstimator& other) const {
        return vocab_size_ == other.vocab_size_ && label_count_ == other.label_count_ &&
               order_ == other.order_ && alpha_ == other.alpha_ &&
               event_rows_ == other.event_rows_ && label_rows_ == other.label_rows_ &&
               label_marginal_pos_ == other.label_marginal_pos_ &&
               label_marginal_total_ == other.label_marginal_total_ &&
               sequences_ == other.sequences_ && tokens_ == other.tokens_;
    }

private:
    void absorb(const LabeledSequence& seq) {
        if (seq.labels.size() != label_count_) {
            throw InvalidModelError("corpus sequence has wrong label vector length");
        }
        const auto tokens = tokens_with_marker(seq);
        tokens_ += tokens.size();
        // Event transitions.
        for (std::size_t t = 1; t < tokens.size(); ++t) {
            auto ctx = context_of(std::span<const EventIndex>(tokens.data(), t));
            auto& row = event_rows_[std::move(ctx)];
            if (row.empty()) row.assign(vocab_size_, 0);
            ++row[tokens[t]];
        }
        // Label conditionals for every prefix, the full sequence included.
        for (std::size_t t = 1; t <= tokens.size(); ++t) {
            auto sig = signature_of(std::span<const EventIndex>(tokens.data(), t));
            auto& cell = label_rows_[std::move(sig)];
            if (cell.positives.empty()) cell.positives.assign(label_count_, 0);
            ++cell.total;
            for (std::size_t j = 0; j < label_count_; ++j) {
                if (seq.labels[j]) ++cell.positives[j];
            }
        }
        ++label_marginal_total_; // one instance per sequence for the marginal
        for (std::size_t j = 0; j < label_count_; ++j) {
            if (seq.labels[j]) ++label_marginal_pos_[j];
        }
    }

    // Last (order-1) tokens, left-padded with the begin marker.
    std::vector<EventIndex> context_of(std::span<const EventIndex> prefix) const {
        const std::size_t width = order_ - 1;
        std::vector<EventIndex> ctx(width, kBeginMarker);
        const std::size_t take = std::min(width, prefix.size());
        for (std::size_t i = 0; i < take; ++i) {
            ctx[width - 1 - i] = prefix[prefix.size() - 1 - i];
        }
        return ctx;
    }

    // Sorted distinct event types among the last `order` real events.
    Signature signature_of(std::span<const EventIndex> prefix) const {
        Signature sig;
        const std::size_t events = prefix.size() - 1;
        const std::size_t take = std::min(order_, events);
        sig.assign(prefix.end() - take, prefix.end());
        std::sort(sig.begin(), sig.end());
        sig.erase(std::unique(sig.begin(), sig.end()), sig.end());
        return sig;
    }

    std::size_t vocab_size_;
    std::size_t label_count_;
    std::size_t order_;
    double alpha_;
    EventRows event_rows_;
    LabelRows label_rows_;
    std::vector<std::uint64_t> label_marginal_pos_;
    std::uint64_t label_marginal_total_ = 0;
    std::size_t sequences_ = 0;
    std::size_t tokens_ = 0;
};

// ---------------------------------------------------------------------------
// Type-erased pair
// ---------------------------------------------------------------------------

// The (event model, label model) pair behind one opaque value. Satisfies
// DensityModel, so the engine can take either a concrete backend or this.
class EstimatorPair {
public:
    template <DensityModel M>
    explicit EstimatorPair(M backend, EstimatorMetadata metadata = {})
        : metadata_(std::move(metadata)) {
        auto shared = std::make_shared<M>(std::move(backend));
        vocab_size_ = shared->vocab_size();
        label_count_ = shared->label_count();
        event_fn_ = [shared](std::span<const EventIndex> prefix) {
            return shared->event_distribution(prefix);
        };
        label_fn_ = [shared](std::span<const EventIndex> prefix) {
            return shared->label_probabilities(prefix);
        };
    }

    CategoricalDistribution event_distribution(std::span<const EventIndex> prefix) const {
        return event_fn_(prefix);
    }
    LabelProbabilities label_probabilities(std::span<const EventIndex> prefix) const {
        return label_fn_(prefix);
    }
    std::size_t vocab_size() const { return vocab_size_; }
    std::size_t label_count() const { return label_count_; }
    const EstimatorMetadata& metadata() const { return metadata_; }

private:
    std::function<CategoricalDistribution(std::span<const EventIndex>)> event_fn_;
    std::function<LabelProbabilities(std::span<const EventIndex>)> label_fn_;
    std::size_t vocab_size_ = 0;
    std::size_t label_count_ = 0;
    EstimatorMetadata metadata_;
};

inline EstimatorPair oracle_pair(GeneratorModel model,
                                 double enumeration_budget = kDefaultEnumerationBudget) {
    EstimatorMetadata md;
    md.backend = "oracle";
    return EstimatorPair(OracleEstimator(std::move(model), enumeration_budget), std::move(md));
}

inline EstimatorPair fit_ngram(std::span<const LabeledSequence> corpus, std::size_t vocab_size,
                               std::size_t label_count, std::size_t order, double alpha = 0.5) {
    auto est = NGramEstimator::fit(corpus, vocab_size, label_count, order, alpha);
    auto md = est.metadata();
    return EstimatorPair(std::move(est), std::move(md));
}

template <DensityModel M>
CategoricalDistribution query_event(const M& pair, std::span<const EventIndex> prefix) {
    return pair.event_distribution(prefix);
}

template <DensityModel M>
LabelProbabilities query_labels(const M& pair, std::span<const EventIndex> prefix) {
    return pair.label_probabilities(prefix);
}

} // namespace oscar
