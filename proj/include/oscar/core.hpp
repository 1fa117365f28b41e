#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace oscar {

inline constexpr std::string_view kVersion = "0.1.0";

using EventIndex = std::uint32_t;
using LabelIndex = std::uint32_t;

// The reserved begin-marker always occupies index 0 of the vocabulary. It
// opens every model prefix and never appears mid-sequence.
inline constexpr EventIndex kBeginMarker = 0;

struct UnknownSymbolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EnumerationTooLargeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyCorpusError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ContextTooShortError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Ordered set of distinct event-type symbols. Index 0 is the begin marker;
// indices and symbols map one-to-one.
class EventVocabulary {
public:
    EventVocabulary() = default;

    // `real_symbols` must not contain the marker symbol or duplicates.
    EventVocabulary(std::string begin_marker, std::vector<std::string> real_symbols) {
        symbols_.reserve(real_symbols.size() + 1);
        symbols_.push_back(std::move(begin_marker));
        for (auto& s : real_symbols) symbols_.push_back(std::move(s));
        build_index();
    }

    static EventVocabulary from_symbols(std::vector<std::string> all_symbols) {
        if (all_symbols.size() < 2) {
            throw InvalidModelError("vocabulary needs the begin marker plus at least one event");
        }
        EventVocabulary v;
        v.symbols_ = std::move(all_symbols);
        v.build_index();
        return v;
    }

    std::size_t size() const { return symbols_.size(); }
    std::size_t real_event_count() const { return symbols_.size() - 1; }

    const std::string& symbol(EventIndex i) const {
        if (i >= symbols_.size()) {
            throw UnknownSymbolError("vocabulary index out of range: " + std::to_string(i));
        }
        return symbols_[i];
    }

    EventIndex index_of(std::string_view symbol) const {
        auto it = index_.find(std::string(symbol));
        if (it == index_.end()) {
            throw UnknownSymbolError("unknown event symbol: " + std::string(symbol));
        }
        return it->second;
    }

    bool contains(std::string_view symbol) const {
        return index_.count(std::string(symbol)) > 0;
    }

    const std::vector<std::string>& symbols() const { return symbols_; }

    bool operator==(const EventVocabulary& other) const { return symbols_ == other.symbols_; }

private:
    void build_index() {
        if (symbols_.size() < 2) {
            throw InvalidModelError("vocabulary needs the begin marker plus at least one event");
        }
        index_.clear();
        for (std::size_t i = 0; i < symbols_.size(); ++i) {
            auto [it, inserted] = index_.emplace(symbols_[i], static_cast<EventIndex>(i));
            if (!inserted) {
                throw InvalidModelError("duplicate vocabulary symbol: " + symbols_[i]);
            }
        }
    }

    std::vector<std::string> symbols_;
    std::unordered_map<std::string, EventIndex> index_;
};

inline EventIndex vocab_lookup(const EventVocabulary& vocab, std::string_view symbol) {
    return vocab.index_of(symbol);
}

// Ordered set of distinct label names.
class LabelCatalog {
public:
    LabelCatalog() = default;

    explicit LabelCatalog(std::vector<std::string> names) : names_(std::move(names)) {
        if (names_.empty()) throw InvalidModelError("label catalog must not be empty");
        for (std::size_t i = 0; i < names_.size(); ++i) {
            auto [it, inserted] = index_.emplace(names_[i], static_cast<LabelIndex>(i));
            if (!inserted) throw InvalidModelError("duplicate label name: " + names_[i]);
        }
    }

    std::size_t size() const { return names_.size(); }

    const std::string& name(LabelIndex i) const {
        if (i >= names_.size()) {
            throw UnknownSymbolError("label index out of range: " + std::to_string(i));
        }
        return names_[i];
    }

    LabelIndex index_of(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) throw UnknownSymbolError("unknown label: " + std::string(name));
        return it->second;
    }

    const std::vector<std::string>& names() const { return names_; }

    bool operator==(const LabelCatalog& other) const { return names_ == other.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, LabelIndex> index_;
};

struct TimedEvent {
    double time = 0.0;
    EventIndex event = 0;

    bool operator==(const TimedEvent&) const = default;
};

// One multi-labeled sequence. Events occupy steps 1..L in vector order; the
// binary label vector attaches at the final step.
struct LabeledSequence {
    std::vector<TimedEvent> events;
    std::vector<std::uint8_t> labels; // one entry per catalog label, 0 or 1

    std::size_t length() const { return events.size(); }

    bool operator==(const LabeledSequence&) const = default;
};

// Validates step/time invariants. Kept separate so deserialized data can be
// checked without paying for it on every construction.
inline void validate_sequence(const LabeledSequence& seq, std::size_t vocab_size,
                              std::size_t label_count) {
    if (seq.events.empty()) throw InvalidModelError("sequence must contain at least one event");
    if (seq.labels.size() != label_count) {
        throw InvalidModelError("label vector length mismatch");
    }
    double prev_time = 0.0;
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        const auto& ev = seq.events[i];
        if (ev.event == kBeginMarker) {
            throw InvalidModelError("begin marker may not appear as a sequence event");
        }
        if (ev.event >= vocab_size) {
            throw UnknownSymbolError("event index out of vocabulary range");
        }
        if (ev.time < 0.0) throw InvalidModelError("negative timestamp");
        if (i > 0 && ev.time < prev_time) {
            throw InvalidModelError("timestamps must be nondecreasing");
        }
        prev_time = ev.time;
    }
}

// Builds the begin-marker-prefixed token view of a sequence: token 1 is the
// marker, token s+1 carries the step-s event. All density queries and engine
// positions index into this layout (1-based).
inline std::vector<EventIndex> tokens_with_marker(const LabeledSequence& seq) {
    std::vector<EventIndex> tokens;
    tokens.reserve(seq.events.size() + 1);
    tokens.push_back(kBeginMarker);
    for (const auto& ev : seq.events) tokens.push_back(ev.event);
    return tokens;
}

// Next-event distribution over the full vocabulary.
struct CategoricalDistribution {
    std::vector<double> probs;
};

inline void validate_distribution(const CategoricalDistribution& dist, double tolerance = 1e-6) {
    double total = 0.0;
    for (double p : dist.probs) {
        if (p < 0.0) throw InvalidModelError("negative probability mass");
        total += p;
    }
    if (total < 1.0 - tolerance || total > 1.0 + tolerance) {
        throw InvalidModelError("distribution does not sum to 1");
    }
}

// Per-label Bernoulli probabilities. Raw values live in [0, 1]; the engine
// clamps them into [eps, 1-eps] before taking logs.
struct LabelProbabilities {
    std::vector<double> probs;
};

// Per-label set of event types. The begin marker never belongs to a boundary.
struct MarkovBoundarySet {
    std::vector<std::set<EventIndex>> per_label;

    std::size_t label_count() const { return per_label.size(); }
};

// Static causal graph extracted from one sequence: event occurrences point at
// the labels they were retained for. The label node sits one step after the
// final event, so every edge satisfies source step < label step.
struct CausalGraph {
    struct EventNode {
        std::size_t step = 0; // 1-based step of the occurrence
        EventIndex event = 0;
    };
    struct Edge {
        std::size_t source = 0; // index into event_nodes
        LabelIndex label = 0;
        double cmi = 0.0;            // nats
        double indicator_mean = 0.0; // in [-1, 1]
        double indicator_std = 0.0;
    };

    std::vector<EventNode> event_nodes;
    std::vector<LabelIndex> label_nodes;
    std::size_t label_step = 0; // = sequence length + 1
    std::vector<Edge> edges;
};

} // namespace oscar
