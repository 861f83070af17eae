#pragma once
// Turns queries, candidate sets, and retrieved knowledge into the textual
// sequences the ranking model consumes, and defines the option-identifier
// alphabet plus target-string rendering.

#include <fstream>
#include <string>
#include <vector>

#include "kgrank/kg.hpp"
#include "kgrank/types.hpp"
#include "kgrank/util.hpp"

namespace kgrank {

constexpr const char* kBlank = "____";

// Instruction template without retrieved knowledge.
constexpr const char* kTemplatePlain =
    "Below is an instruction that describes a task, paired with a question and "
    "corresponding candidate answers. The questions and candidate answers have been "
    "combined into candidate corresponding statements. Combine what you know, output "
    "a ranking of these candidate answers.\n\n"
    "### Question: {x_q}\n\n"
    "{x_c} ### Response: ";

// Instruction template with supporting-knowledge slots.
constexpr const char* kTemplateKnowledge =
    "Below is an instruction that describes a task, paired with a question and "
    "corresponding candidate answers. The questions and candidate answers have been "
    "combined into candidate corresponding statements. Knowledge related to some "
    "candidates will be provided that may be useful for ranking. Combine what you "
    "know and the following knowledge, output a ranking of these candidate "
    "answers.\n\n"
    "### Supporting information: {x_k_q}\n\n"
    "### Candidate supporting knowledge: {x_k_c}\n\n"
    "### Question: {x_q}\n\n"
    "{x_c} ### Response: ";

// Identifier for 0-based position i: A..Z, then AA, AB, ... (bijective base 26).
inline std::string option_identifier(int32_t i) {
    require(i >= 0, "option identifier index must be non-negative");
    std::string s;
    int64_t n = i + 1;
    while (n > 0) {
        int64_t r = (n - 1) % 26;
        s.insert(s.begin(), static_cast<char>('A' + r));
        n = (n - 1) / 26;
    }
    return s;
}

inline std::vector<std::string> option_alphabet(int32_t k) {
    require(k >= 1, "alphabet size must be at least 1");
    std::vector<std::string> ids;
    ids.reserve(k);
    for (int32_t i = 0; i < k; ++i) ids.push_back(option_identifier(i));
    return ids;
}

// 0-based position of `symbol` within the K-symbol alphabet, or -1.
inline int32_t identifier_index(const std::string& symbol, int32_t k) {
    for (int32_t i = 0; i < k; ++i)
        if (option_identifier(i) == symbol) return i;
    return -1;
}

// Query sentence with a blank at the unknown slot.  A relation template, when
// present, must contain both [H] and [T]; without one, labels are concatenated.
inline std::string make_query_sequence(const KnowledgeGraph& kg, const Query& q) {
    require(q.known >= 0 && q.known < kg.entity_count(), "query entity out of range");
    require(q.rel >= 0 && q.rel < kg.relation_count(), "query relation out of range");
    const std::string& known = kg.entity_labels[q.known];
    const std::string* tpl = nullptr;
    if (!kg.relation_templates.empty() && !kg.relation_templates[q.rel].empty())
        tpl = &kg.relation_templates[q.rel];
    if (tpl) {
        if (tpl->find("[H]") == std::string::npos || tpl->find("[T]") == std::string::npos)
            fail("relation template for '" + kg.relation_labels[q.rel] +
                 "' must contain [H] and [T]");
        std::string s = *tpl;
        if (q.dir == Direction::Tail) {
            replace_first(s, "[H]", known);
            replace_first(s, "[T]", kBlank);
        } else {
            replace_first(s, "[H]", kBlank);
            replace_first(s, "[T]", known);
        }
        return s;
    }
    const std::string& rel = kg.relation_labels[q.rel];
    if (q.dir == Direction::Tail) return known + " " + rel + " " + kBlank + "?";
    return std::string(kBlank) + " " + rel + " " + known + "?";
}

// Appends the known entity's definition when the DP toggle applies.
inline std::string decorate_query(const KnowledgeGraph& kg, const Query& q, std::string x_q,
                                  bool dp) {
    if (dp && kg.has_definitions() && !kg.entity_definitions[q.known].empty())
        x_q += " (" + kg.entity_definitions[q.known] + ")";
    return x_q;
}

// The query sentence with its blank filled by a concrete label.
inline std::string fill_blank(const std::string& x_q, const std::string& label) {
    std::string s = x_q;
    require(replace_first(s, kBlank, label), "query sequence has no blank to fill");
    return s;
}

// "A. <piece> B. <piece> ..." where a piece is the raw label, or with qci the
// query sentence restated with that candidate filled in.
inline std::string make_candidate_sequence(const std::string& x_q,
                                           const std::vector<std::string>& labels, bool qci) {
    require(!labels.empty(), "candidate list is empty");
    std::string out;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (i) out += " ";
        out += option_identifier(static_cast<int32_t>(i)) + ". ";
        out += qci ? fill_blank(x_q, labels[i]) : labels[i];
    }
    return out;
}

struct PromptBundle {
    std::string x_q;
    std::string x_c;
    std::string x_k_q;
    std::string x_k_c;
};

inline std::string assemble_input(const PromptBundle& b, bool knowledge_mode) {
    require(!b.x_q.empty() && !b.x_c.empty(), "prompt bundle needs query and candidate text");
    std::string s = knowledge_mode ? kTemplateKnowledge : kTemplatePlain;
    if (knowledge_mode) {
        replace_first(s, "{x_k_q}", b.x_k_q);
        replace_first(s, "{x_k_c}", b.x_k_c);
    }
    replace_first(s, "{x_q}", b.x_q);
    replace_first(s, "{x_c}", b.x_c);
    return s;
}

// Renders a ranking as identifiers joined by spaces.  perm[t] is the 1-based
// candidate position ranked at place t, so [3,1,2] renders as "C A B".
inline std::string make_target(const std::vector<int32_t>& perm) {
    const int32_t k = static_cast<int32_t>(perm.size());
    require(k >= 1, "empty permutation");
    std::vector<char> seen(k, 0);
    for (int32_t p : perm) {
        require(p >= 1 && p <= k, "permutation entry out of range");
        require(!seen[p - 1], "permutation repeats a position");
        seen[p - 1] = 1;
    }
    std::string out;
    for (int32_t t = 0; t < k; ++t) {
        if (t) out += " ";
        out += option_identifier(perm[t] - 1);
    }
    return out;
}

// Loads a shipped template asset, expanding two-character "\n" escapes into
// newlines.  Files live under assets/templates/.
inline std::string load_template_asset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(bool(is), "cannot read template asset: " + path);
    std::string raw((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    while (!raw.empty() && (raw.back() == '\n' || raw.back() == '\r')) raw.pop_back();
    std::string out;
    out.reserve(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '\\' && i + 1 < raw.size() && raw[i + 1] == 'n') {
            out += '\n';
            ++i;
        } else {
            out += raw[i];
        }
    }
    return out;
}

}  // namespace kgrank
