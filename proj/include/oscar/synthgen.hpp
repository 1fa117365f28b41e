#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "oscar/core.hpp"
#include "oscar/rng.hpp"

namespace oscar {

// ---------------------------------------------------------------------------
// Boolean label rules
// ---------------------------------------------------------------------------

struct Literal {
    EventIndex event = 0;
    bool negated = false;

    bool operator==(const Literal&) const = default;
};

// Conjunction of clauses; each clause is a disjunction of literals. A rule
// evaluates on the presence set of a complete sequence: an event is "true"
// iff it occurred at least once at any step.
struct LabelRule {
    LabelIndex label = 0;
    std::vector<std::vector<Literal>> clauses;

    bool operator==(const LabelRule&) const = default;
};

// Presence mask over vocabulary indices for one sequence.
struct PresenceMask {
    std::vector<std::uint8_t> present;

    static PresenceMask from_events(std::span<const EventIndex> events, std::size_t vocab_size) {
        PresenceMask m;
        m.present.assign(vocab_size, 0);
        for (EventIndex e : events) {
            if (e < vocab_size) m.present[e] = 1;
        }
        return m;
    }

    bool has(EventIndex e) const { return e < present.size() && present[e] != 0; }
};

inline bool evaluate_rule(const LabelRule& rule, const PresenceMask& presence) {
    for (const auto& clause : rule.clauses) {
        bool satisfied = false;
        for (const auto& lit : clause) {
            if (presence.has(lit.event) != lit.negated) {
                satisfied = true;
                break;
            }
        }
        if (!satisfied) return false;
    }
    return true;
}

// All event types mentioned by a rule, negated or not.
inline std::set<EventIndex> rule_variables(const LabelRule& rule) {
    std::set<EventIndex> vars;
    for (const auto& clause : rule.clauses) {
        for (const auto& lit : clause) vars.insert(lit.event);
    }
    return vars;
}

// ---------------------------------------------------------------------------
// Generator model
// ---------------------------------------------------------------------------

struct LengthWeight {
    std::size_t length = 0;
    double weight = 0.0;

    bool operator==(const LengthWeight&) const = default;
};

// Labels without a rule get independent coin flips; the eval module treats
// them as having no ground truth.
struct RulelessLabel {
    LabelIndex label = 0;
    double prob = 0.0;

    bool operator==(const RulelessLabel&) const = default;
};

// First-order Markov chain over event types plus boolean label rules. Row i
// of `transition` is the next-event distribution after event i; the begin
// marker's row is the initial distribution and its column is zero everywhere.
struct GeneratorModel {
    EventVocabulary vocab;
    LabelCatalog labels;
    std::vector<std::vector<double>> transition;
    std::vector<LengthWeight> lengths;
    std::vector<LabelRule> rules;
    std::vector<RulelessLabel> ruleless;
    std::uint64_t seed = 0;

    static std::vector<LengthWeight> fixed_length(std::size_t length) {
        return {LengthWeight{length, 1.0}};
    }

    std::size_t max_length() const {
        std::size_t m = 0;
        for (const auto& lw : lengths) m = std::max(m, lw.length);
        return m;
    }
};

inline constexpr double kRowSumTolerance = 1e-9;
inline constexpr std::size_t kMaxRuleVariables = 16;
inline constexpr double kDefaultEnumerationBudget = 1e7;

inline void validate_generator_model(const GeneratorModel& model) {
    const std::size_t n = model.vocab.size();
    if (model.transition.size() != n) {
        throw InvalidModelError("transition matrix must have one row per vocabulary entry");
    }
    for (std::size_t r = 0; r < n; ++r) {
        const auto& row = model.transition[r];
        if (row.size() != n) throw InvalidModelError("transition row has wrong width");
        double sum = 0.0;
        for (double p : row) {
            if (p < 0.0) throw InvalidModelError("negative transition probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
            throw InvalidModelError("transition row " + std::to_string(r) + " does not sum to 1");
        }
        if (row[kBeginMarker] != 0.0) {
            throw InvalidModelError("begin marker may never be re-emitted");
        }
    }
    if (model.lengths.empty()) throw InvalidModelError("length spec must not be empty");
    for (const auto& lw : model.lengths) {
        if (lw.length < 1) throw InvalidModelError("sequence length must be at least 1");
        if (lw.weight <= 0.0) throw InvalidModelError("length weight must be positive");
    }

    std::vector<std::uint8_t> covered(model.labels.size(), 0);
    for (const auto& rule : model.rules) {
        if (rule.label >= model.labels.size()) throw InvalidModelError("rule label out of range");
        if (covered[rule.label]++) throw InvalidModelError("label covered twice");
        if (rule.clauses.empty()) throw InvalidModelError("rule needs at least one clause");
        for (const auto& clause : rule.clauses) {
            if (clause.empty()) throw InvalidModelError("empty clause in rule");
            for (const auto& lit : clause) {
                if (lit.event == kBeginMarker || lit.event >= n) {
                    throw InvalidModelError("rule literal must name a real event");
                }
            }
        }
        if (rule_variables(rule).size() > kMaxRuleVariables) {
            throw InvalidModelError("rule mentions too many distinct events");
        }
    }
    for (const auto& rl : model.ruleless) {
        if (rl.label >= model.labels.size()) throw InvalidModelError("ruleless label out of range");
        if (covered[rl.label]++) throw InvalidModelError("label covered twice");
        if (rl.prob < 0.0 || rl.prob > 1.0) throw InvalidModelError("coin probability out of [0,1]");
    }
    for (std::size_t j = 0; j < covered.size(); ++j) {
        if (!covered[j]) {
            throw InvalidModelError("label '" + model.labels.name(static_cast<LabelIndex>(j)) +
                                    "' has neither rule nor coin");
        }
    }
}

// Ground-truth Markov Boundary: per ruled label, every event type appearing
// in any literal. Ruleless labels keep an empty set.
inline MarkovBoundarySet true_markov_boundary(const std::vector<LabelRule>& rules,
                                              std::size_t label_count) {
    MarkovBoundarySet mb;
    mb.per_label.resize(label_count);
    for (const auto& rule : rules) {
        if (rule.label >= label_count) throw InvalidModelError("rule label out of range");
        auto vars = rule_variables(rule);
        mb.per_label[rule.label].insert(vars.begin(), vars.end());
    }
    return mb;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t draw_length(const GeneratorModel& model, RandomStream& rng) {
    if (model.lengths.size() == 1) return model.lengths[0].length;
    std::vector<double> w;
    w.reserve(model.lengths.size());
    for (const auto& lw : model.lengths) w.push_back(lw.weight);
    return model.lengths[rng.next_weighted(w)].length;
}

inline void assign_labels(const GeneratorModel& model, LabeledSequence& seq, RandomStream& rng) {
    std::vector<EventIndex> evs;
    evs.reserve(seq.events.size());
    for (const auto& te : seq.events) evs.push_back(te.event);
    PresenceMask presence = PresenceMask::from_events(evs, model.vocab.size());

    seq.labels.assign(model.labels.size(), 0);
    for (const auto& rule : model.rules) {
        seq.labels[rule.label] = evaluate_rule(rule, presence) ? 1 : 0;
    }
    for (const auto& rl : model.ruleless) {
        seq.labels[rl.label] = rng.next_unit() < rl.prob ? 1 : 0;
    }
}

} // namespace detail

// Draws one sequence from the stream derived for (model.seed, index).
inline LabeledSequence sample_sequence(const GeneratorModel& model, std::size_t index) {
    RandomStream rng = RandomStream::derive(model.seed, {index});
    LabeledSequence seq;
    const std::size_t length = detail::draw_length(model, rng);
    seq.events.reserve(length);
    EventIndex state = kBeginMarker;
    double time = 0.0;
    for (std::size_t step = 0; step < length; ++step) {
        state = static_cast<EventIndex>(rng.next_weighted(model.transition[state]));
        time += rng.next_unit();
        seq.events.push_back(TimedEvent{time, state});
    }
    detail::assign_labels(model, seq, rng);
    return seq;
}

// n sequences i.i.d.; deterministic given model.seed. Per-sequence derived
// streams make any parallel split reproduce the serial output.
inline std::vector<LabeledSequence> sample_dataset(const GeneratorModel& model, std::size_t n) {
    validate_generator_model(model);
    if (n < 1) throw EmptyInputError("sample_dataset needs n >= 1");
    std::vector<LabeledSequence> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample_sequence(model, i));
    return out;
}

// ---------------------------------------------------------------------------
// Exact conditionals by enumeration
// ---------------------------------------------------------------------------

namespace detail {

inline void check_prefix(const GeneratorModel& model, std::span<const EventIndex> prefix) {
    if (prefix.empty() || prefix[0] != kBeginMarker) {
        throw InvalidModelError("prefix must start with the begin marker");
    }
    for (std::size_t i = 1; i < prefix.size(); ++i) {
        if (prefix[i] == kBeginMarker) {
            throw InvalidModelError("begin marker may not appear mid-prefix");
        }
        if (prefix[i] >= model.vocab.size()) {
            throw UnknownSymbolError("prefix event out of vocabulary range");
        }
    }
    if (prefix.size() - 1 > model.max_length()) {
        throw InvalidModelError("prefix longer than the model's sequence length");
    }
}

// The nominal completion count for a query is (|X|-1)^(remaining steps);
// enforcing the budget on that count keeps query cost predictable even
// though the table-based evaluation below is far cheaper.
inline void check_budget(const GeneratorModel& model, std::size_t observed_events, double budget) {
    const double q = static_cast<double>(model.vocab.real_event_count());
    const std::size_t remaining = model.max_length() - observed_events;
    if (static_cast<double>(remaining) * std::log(q) > std::log(budget)) {
        throw EnumerationTooLargeError("completion count exceeds enumeration budget");
    }
}

} // namespace detail

// Exact P(Y_label = 1 | prefix) for one ruled or ruleless label, equal to the
// sum over all completions of the prefix weighted by transition probability.
// The sum is evaluated by dynamic programming over (remaining steps, chain
// state, presence mask of the rule's variables), which factors the completion
// tree without changing the result beyond float rounding.
class LabelConditionalTable {
public:
    LabelConditionalTable(const GeneratorModel& model, LabelIndex label) {
        const auto* rule = find_rule(model, label);
        if (rule == nullptr) {
            for (const auto& rl : model.ruleless) {
                if (rl.label == label) {
                    coin_prob_ = rl.prob;
                    is_coin_ = true;
                    return;
                }
            }
            throw InvalidModelError("label has neither rule nor coin");
        }

        auto vars = rule_variables(*rule);
        vars_.assign(vars.begin(), vars.end());
        var_bit_.assign(model.vocab.size(), 0);
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            var_bit_[vars_[i]] = 1u << i;
        }
        const std::size_t mask_count = std::size_t{1} << vars_.size();

        // Rule truth per presence mask.
        rule_value_.resize(mask_count);
        for (std::size_t m = 0; m < mask_count; ++m) {
            PresenceMask pm;
            pm.present.assign(model.vocab.size(), 0);
            for (std::size_t i = 0; i < vars_.size(); ++i) {
                if (m & (std::size_t{1} << i)) pm.present[vars_[i]] = 1;
            }
            rule_value_[m] = evaluate_rule(*rule, pm) ? 1 : 0;
        }

        // value_[L][r][s * mask_count + m] = P(Y=1 | r steps remain, state s,
        // presence mask m) for a sequence of total length L.
        const std::size_t n = model.vocab.size();
        for (const auto& lw : model.lengths) {
            auto& layers = value_[lw.length];
            layers.resize(lw.length + 1);
            layers[0].resize(n * mask_count);
            for (std::size_t s = 0; s < n; ++s) {
                for (std::size_t m = 0; m < mask_count; ++m) {
                    layers[0][s * mask_count + m] = rule_value_[m] ? 1.0 : 0.0;
                }
            }
            for (std::size_t r = 1; r <= lw.length; ++r) {
                layers[r].resize(n * mask_count);
                for (std::size_t s = 0; s < n; ++s) {
                    const auto& row = model.transition[s];
                    for (std::size_t m = 0; m < mask_count; ++m) {
                        double acc = 0.0;
                        for (std::size_t x = 1; x < n; ++x) {
                            if (row[x] == 0.0) continue;
                            acc += row[x] * layers[r - 1][x * mask_count + (m | var_bit_[x])];
                        }
                        layers[r][s * mask_count + m] = acc;
                    }
                }
            }
        }
        length_weights_ = model.lengths;
    }

    double query(std::span<const EventIndex> prefix) const {
        if (is_coin_) return coin_prob_;

        const std::size_t observed = prefix.size() - 1;
        std::size_t mask = 0;
        for (std::size_t i = 1; i < prefix.size(); ++i) mask |= var_bit_[prefix[i]];
        const EventIndex state = prefix.back();
        const std::size_t mask_count = std::size_t{1} << vars_.size();

        // Marginalize over lengths still compatible with the prefix.
        double weighted = 0.0;
        double weight_total = 0.0;
        for (const auto& lw : length_weights_) {
            if (lw.length < observed) continue;
            const auto& layers = value_.at(lw.length);
            weighted += lw.weight * layers[lw.length - observed][state * mask_count + mask];
            weight_total += lw.weight;
        }
        if (weight_total == 0.0) {
            throw InvalidModelError("prefix longer than every admissible length");
        }
        return weighted / weight_total;
    }

private:
    static const LabelRule* find_rule(const GeneratorModel& model, LabelIndex label) {
        for (const auto& rule : model.rules) {
            if (rule.label == label) return &rule;
        }
        return nullptr;
    }

    bool is_coin_ = false;
    double coin_prob_ = 0.0;
    std::vector<EventIndex> vars_;
    std::vector<std::uint32_t> var_bit_;
    std::vector<std::uint8_t> rule_value_;
    std::map<std::size_t, std::vector<std::vector<double>>> value_;
    std::vector<LengthWeight> length_weights_;
};

// P(Y_label = 1 | prefix), exact to float rounding. `prefix` is the
// begin-marker-prefixed token list; the budget caps the nominal completion
// count (|X|-1)^(L - |prefix| + 1).
inline double exact_label_conditional(const GeneratorModel& model,
                                      std::span<const EventIndex> prefix, LabelIndex label,
                                      double enumeration_budget = kDefaultEnumerationBudget) {
    detail::check_prefix(model, prefix);
    if (label >= model.labels.size()) throw UnknownSymbolError("label index out of range");
    detail::check_budget(model, prefix.size() - 1, enumeration_budget);
    LabelConditionalTable table(model, label);
    return table.query(prefix);
}

// Next-event distribution after a prefix: the transition row of its last
// token.
inline CategoricalDistribution exact_next_event(const GeneratorModel& model,
                                                std::span<const EventIndex> prefix) {
    detail::check_prefix(model, prefix);
    return CategoricalDistribution{model.transition[prefix.back()]};
}

} // namespace oscar
