#pragma once

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <string>

#include "oscar/core.hpp"
#include "oscar/engine.hpp"

namespace oscar {

// Renders one sequence's causal graph as DOT. Event occurrences are ellipses
// keyed by (step, event); labels are filled boxes. Edge width scales with
// CMI; color encodes the indicator sign (red/orange for excitation depending
// on magnitude, pink for inhibition).
inline std::string to_dot(const CausalGraph& graph, const EventVocabulary& vocab,
                          const LabelCatalog& catalog, const std::string& name = "causal") {
    double max_cmi = 0.0;
    for (const auto& e : graph.edges) max_cmi = std::max(max_cmi, e.cmi);

    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "digraph \"" << name << "\" {\n";
    os << "  rankdir=LR;\n";
    os << "  node [fontname=\"Helvetica\"];\n";
    for (std::size_t i = 0; i < graph.event_nodes.size(); ++i) {
        const auto& n = graph.event_nodes[i];
        os << "  e" << i << " [label=\"" << vocab.symbol(n.event) << "\\nstep " << n.step
           << "\", shape=ellipse, color=steelblue];\n";
    }
    for (LabelIndex j : graph.label_nodes) {
        os << "  y" << j << " [label=\"" << catalog.name(j)
           << "\", shape=box, style=filled, fillcolor=mistyrose];\n";
    }
    for (const auto& e : graph.edges) {
        const char* color = "orange";
        if (e.indicator_mean < 0.0) {
            color = "pink";
        } else if (max_cmi > 0.0 && e.cmi >= 0.5 * max_cmi) {
            color = "red";
        }
        const double width = max_cmi > 0.0 ? 1.0 + 4.0 * (e.cmi / max_cmi) : 1.0;
        os << "  e" << e.source << " -> y" << e.label << " [color=" << color
           << ", penwidth=" << width << ", label=\"" << e.cmi << "\"];\n";
    }
    os << "}\n";
    return os.str();
}

inline std::string to_dot(const DiscoveryResult& result, const EventVocabulary& vocab,
                          const LabelCatalog& catalog, const std::string& name = "causal") {
    return to_dot(build_causal_graph(result), vocab, catalog, name);
}

} // namespace oscar
