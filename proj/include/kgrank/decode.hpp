#pragma once
// Constrained emission of identifier permutations, plus parsing and diagnosis
// of free-text rankings coming back from external generators.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgrank/util.hpp"
#include "kgrank/verbalizer.hpp"

namespace kgrank {

struct DecodeState {
    std::vector<int32_t> emitted;  // 0-based identifier indices, in emission order
    std::vector<char> used;        // used[i] != 0 once identifier i is emitted
};

// Given the state so far, yields one logit per identifier.
using LogitProvider = std::function<std::vector<double>(const DecodeState&)>;

// Greedy decoding where already-emitted identifiers are masked out, so the
// output is a full permutation by construction.  Returns 1-based candidate
// positions in rank order; ties go to the lowest identifier index.
inline std::vector<int32_t> constrained_greedy_decode(const LogitProvider& provider, int32_t k) {
    require(k >= 1, "decode: need at least one identifier");
    DecodeState state;
    state.used.assign(k, 0);
    std::vector<int32_t> perm;
    perm.reserve(k);
    for (int32_t slot = 0; slot < k; ++slot) {
        auto logits = provider(state);
        require(static_cast<int32_t>(logits.size()) == k,
                "decode: provider returned wrong logit count");
        int32_t best = -1;
        double best_v = -std::numeric_limits<double>::infinity();
        for (int32_t i = 0; i < k; ++i) {
            if (state.used[i]) continue;
            if (!std::isfinite(logits[i])) fail("decode: non-finite logit from provider");
            if (logits[i] > best_v) {
                best_v = logits[i];
                best = i;
            }
        }
        state.used[best] = 1;
        state.emitted.push_back(best);
        perm.push_back(best + 1);
    }
    return perm;
}

enum class ParseOutcome { Ok, Mismatch, Misordering, Omission, Duplication };

inline const char* to_string(ParseOutcome o) {
    switch (o) {
        case ParseOutcome::Ok: return "ok";
        case ParseOutcome::Mismatch: return "mismatch";
        case ParseOutcome::Misordering: return "misordering";
        case ParseOutcome::Omission: return "omission";
        case ParseOutcome::Duplication: return "duplication";
    }
    return "?";
}

struct ParseDiagnosis {
    ParseOutcome outcome = ParseOutcome::Mismatch;
    std::vector<int32_t> permutation;  // 1-based positions, filled iff outcome == Ok
    std::vector<int32_t> recognized;   // 0-based identifier indices, first occurrences
};

// Classifies a whitespace-tokenized ranking string against the K-symbol
// alphabet.  Any unknown token is a mismatch; otherwise repeats are a
// duplication and missing symbols an omission.  Misordering is a ranking
// quality matter, not a grammar violation, so the parser never returns it.
inline ParseDiagnosis parse_ranking(const std::string& text, int32_t k) {
    ParseDiagnosis d;
    auto tokens = split_whitespace(text);
    std::vector<char> seen(k, 0);
    bool unknown = false, repeated = false;
    for (const auto& tok : tokens) {
        int32_t idx = identifier_index(tok, k);
        if (idx < 0) {
            unknown = true;
            continue;
        }
        if (seen[idx]) {
            repeated = true;
            continue;
        }
        seen[idx] = 1;
        d.recognized.push_back(idx);
    }
    if (unknown) {
        d.outcome = ParseOutcome::Mismatch;
    } else if (repeated) {
        d.outcome = ParseOutcome::Duplication;
    } else if (static_cast<int32_t>(d.recognized.size()) < k) {
        d.outcome = ParseOutcome::Omission;
    } else {
        d.outcome = ParseOutcome::Ok;
        d.permutation.reserve(k);
        for (int32_t idx : d.recognized) d.permutation.push_back(idx + 1);
    }
    return d;
}

// One generation from an external model: raw text, and optionally the
// per-slot identifier logits it observed.
struct GenerationResult {
    std::string text;
    bool has_steps = false;
    std::vector<std::map<std::string, double>> steps;  // identifier symbol -> logit
};

// When per-step logits are available, decodes under the permutation
// constraint (always ok).  Otherwise falls back to parsing the raw text; a
// reply with no recognizable identifier at all failed to include any
// candidate, which is an omission rather than a stray-symbol mismatch.
inline ParseDiagnosis diagnose_generation(const GenerationResult& g, int32_t k) {
    if (g.has_steps) {
        require(static_cast<int32_t>(g.steps.size()) >= k,
                "external generator returned fewer logit steps than slots");
        auto ids = option_alphabet(k);
        LogitProvider provider = [&](const DecodeState& st) {
            const auto& step = g.steps[st.emitted.size()];
            std::vector<double> logits(k, -std::numeric_limits<double>::infinity());
            for (int32_t i = 0; i < k; ++i) {
                auto it = step.find(ids[i]);
                if (it != step.end()) logits[i] = it->second;
            }
            // Identifiers the adapter did not score stay at -inf unless every
            // remaining one is missing, which would leave argmax undefined.
            bool any = false;
            for (int32_t i = 0; i < k; ++i)
                if (!st.used[i] && std::isfinite(logits[i])) any = true;
            require(any, "external generator step scored no remaining identifier");
            for (int32_t i = 0; i < k; ++i)
                if (!st.used[i] && !std::isfinite(logits[i]))
                    logits[i] = std::numeric_limits<double>::lowest();
            return logits;
        };
        ParseDiagnosis d;
        d.outcome = ParseOutcome::Ok;
        d.permutation = constrained_greedy_decode(provider, k);
        for (int32_t p : d.permutation) d.recognized.push_back(p - 1);
        return d;
    }
    ParseDiagnosis d = parse_ranking(g.text, k);
    if (d.outcome == ParseOutcome::Mismatch && d.recognized.empty())
        d.outcome = ParseOutcome::Omission;
    return d;
}

// Adapter speaking one JSON object per line over a subprocess pipe:
//   request  {"prompt": "..."}
//   response {"text": "...", "steps": [{"A": 1.2, "B": 0.3, ...}, ...]}
// with "steps" optional.
class ExternalGenerator {
public:
    explicit ExternalGenerator(std::vector<std::string> argv, int timeout_ms = 30000)
        : proc_(std::move(argv), timeout_ms) {}

    GenerationResult generate(const std::string& prompt) {
        nlohmann::json req;
        req["prompt"] = prompt;
        proc_.write_line(req.dump());
        auto line = proc_.read_line();
        nlohmann::json rsp = nlohmann::json::parse(line, nullptr, false);
        require(!rsp.is_discarded() && rsp.is_object(),
                "external generator sent malformed JSON: " + line);
        GenerationResult g;
        g.text = rsp.value("text", "");
        if (rsp.contains("steps")) {
            require(rsp["steps"].is_array(), "external generator: steps must be an array");
            g.has_steps = true;
            for (const auto& step : rsp["steps"]) {
                require(step.is_object(), "external generator: each step must be an object");
                std::map<std::string, double> m;
                for (auto it = step.begin(); it != step.end(); ++it)
                    m[it.key()] = it.value().get<double>();
                g.steps.push_back(std::move(m));
            }
        }
        return g;
    }

    ParseDiagnosis generate_ranking(const std::string& prompt, int32_t k) {
        return diagnose_generation(generate(prompt), k);
    }

private:
    Subprocess proc_;
};

}  // namespace kgrank
