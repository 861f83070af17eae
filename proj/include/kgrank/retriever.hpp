#pragma once
// Retrieval of supporting knowledge from the training triples: embeds every
// training-triple sequence once, then serves cosine nearest neighbors for
// query-related and candidate-supporting prompts.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kgrank/kg.hpp"
#include "kgrank/util.hpp"
#include "kgrank/verbalizer.hpp"

namespace kgrank {

class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual std::vector<double> embed(const std::string& text) const = 0;
    virtual bool thread_safe() const { return false; }
};

// Dependency-free sentence embedder: lowercased alphanumeric tokens, unigram
// and bigram features hashed into a fixed number of buckets, L2-normalized.
// Deterministic stand-in for a neural sentence encoder; empty text maps to
// the zero vector, which scores cosine 0 against everything.
class HashedEmbedder final : public TextEmbedder {
public:
    explicit HashedEmbedder(int32_t buckets = 512) : buckets_(buckets) {
        require(buckets_ > 0, "embedder needs at least one bucket");
    }

    std::vector<double> embed(const std::string& text) const override {
        std::vector<double> v(buckets_, 0.0);
        auto tokens = tokenize(text);
        for (size_t i = 0; i < tokens.size(); ++i) {
            v[fnv1a64(tokens[i]) % buckets_] += 1.0;
            if (i + 1 < tokens.size())
                v[fnv1a64(tokens[i] + " " + tokens[i + 1]) % buckets_] += 1.0;
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& x : v) x /= norm;
        }
        return v;
    }

    bool thread_safe() const override { return true; }

private:
    int32_t buckets_;
};

// Adapter for an external encoder process: one text line in, one
// whitespace-separated float vector line out.  Replies are L2-normalized on
// receipt so downstream dot products are cosines.
class ExternalEmbedder final : public TextEmbedder {
public:
    explicit ExternalEmbedder(std::vector<std::string> argv, int timeout_ms = 30000)
        : proc_(std::make_unique<Subprocess>(std::move(argv), timeout_ms)) {}

    std::vector<double> embed(const std::string& text) const override {
        std::string line = text;
        for (char& c : line)
            if (c == '\n' || c == '\r') c = ' ';
        proc_->write_line(line);
        auto reply = proc_->read_line();
        std::istringstream is(reply);
        std::vector<double> v;
        double x;
        while (is >> x) v.push_back(x);
        require(!v.empty(), "external embedder sent no values: '" + reply + "'");
        if (width_ == 0)
            width_ = static_cast<int32_t>(v.size());
        else
            require(static_cast<int32_t>(v.size()) == width_,
                    "external embedder changed vector width");
        double norm = 0.0;
        for (double y : v) norm += y * y;
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& y : v) y /= norm;
        }
        return v;
    }

private:
    mutable std::unique_ptr<Subprocess> proc_;
    mutable int32_t width_ = 0;
};

struct TrainingTextIndex {
    std::vector<std::string> sequences;              // one per training triple, file order
    std::vector<std::vector<double>> embeddings;     // row i embeds sequence i
    std::shared_ptr<const TextEmbedder> embedder;
};

// The complete sentence for a triple: the tail-query sentence with the blank
// filled by the tail label.  Definitions and other prompt decorations are
// deliberately not applied here.
inline std::string triple_sequence(const KnowledgeGraph& kg, const Triple& t) {
    auto x_q = make_query_sequence(kg, {t.head, t.rel, Direction::Tail});
    return fill_blank(x_q, kg.entity_labels[t.tail]);
}

inline TrainingTextIndex build_index(const KnowledgeGraph& kg,
                                     std::shared_ptr<const TextEmbedder> embedder) {
    require(embedder != nullptr, "retriever needs an embedder");
    TrainingTextIndex index;
    index.embedder = std::move(embedder);
    index.sequences.reserve(kg.train.size());
    for (const auto& t : kg.train) index.sequences.push_back(triple_sequence(kg, t));
    index.embeddings.resize(index.sequences.size());
    auto embed_row = [&](int64_t i) {
        index.embeddings[i] = index.embedder->embed(index.sequences[i]);
    };
    if (index.embedder->thread_safe()) {
        parallel_for(static_cast<int64_t>(index.sequences.size()), thread_count_from_env(),
                     embed_row);
    } else {
        for (int64_t i = 0; i < static_cast<int64_t>(index.sequences.size()); ++i) embed_row(i);
    }
    return index;
}

struct RetrievedItem {
    int32_t row;
    double similarity;
    std::string sequence;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size(), "vector width mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Top-k rows by cosine similarity, descending, ties by ascending row index.
// With a threshold, rows scoring below it are dropped, so the result may hold
// fewer than k items or none.
inline std::vector<RetrievedItem> retrieve(const TrainingTextIndex& index,
                                           const std::string& query_text, int32_t k,
                                           std::optional<double> theta = std::nullopt) {
    require(k >= 1, "retrieve: k must be at least 1");
    if (theta) require(*theta >= 0.0 && *theta <= 1.0, "retrieve: theta must lie in [0,1]");
    const int64_t n = static_cast<int64_t>(index.embeddings.size());
    if (n == 0) return {};
    auto qv = index.embedder->embed(query_text);
    std::vector<double> sims(n);
    for (int64_t i = 0; i < n; ++i) sims[i] = dot(qv, index.embeddings[i]);

    std::vector<int32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto better = [&](int32_t a, int32_t b) {
        if (sims[a] != sims[b]) return sims[a] > sims[b];
        return a < b;
    };
    int64_t take = std::min<int64_t>(k, n);
    std::partial_sort(order.begin(), order.begin() + take, order.end(), better);
    std::vector<RetrievedItem> out;
    for (int64_t i = 0; i < take; ++i) {
        int32_t row = order[i];
        if (theta && sims[row] < *theta) continue;
        out.push_back({row, sims[row], index.sequences[row]});
    }
    return out;
}

// Query-related prompt: the K_q nearest training sequences, joined by ". ".
inline std::string query_related_prompt(const TrainingTextIndex& index, const std::string& x_q,
                                        int32_t k_q) {
    auto items = retrieve(index, x_q, k_q);
    std::string out;
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += ". ";
        out += items[i].sequence;
    }
    return out;
}

struct CandidateSupport {
    std::string prompt;                   // identifier-prefixed blocks, "" when nothing passes
    std::vector<double> max_similarity;   // per candidate, 0 when nothing passes theta
};

// Per-candidate thresholded retrieval.  Each candidate with any hit above
// theta contributes a block "<identifier>. <seq>. <seq>..."; blocks join with
// a single space.  The per-candidate best similarity doubles as an evidence
// feature for the ranking model.
inline CandidateSupport candidate_support(const TrainingTextIndex& index,
                                          const std::vector<std::string>& candidate_sequences,
                                          int32_t k_c, double theta) {
    require(theta >= 0.0 && theta <= 1.0, "candidate support: theta must lie in [0,1]");
    CandidateSupport cs;
    cs.max_similarity.assign(candidate_sequences.size(), 0.0);
    for (size_t i = 0; i < candidate_sequences.size(); ++i) {
        auto items = retrieve(index, candidate_sequences[i], k_c, theta);
        if (items.empty()) continue;
        cs.max_similarity[i] = items.front().similarity;
        if (!cs.prompt.empty()) cs.prompt += " ";
        cs.prompt += option_identifier(static_cast<int32_t>(i)) + ". ";
        for (size_t j = 0; j < items.size(); ++j) {
            if (j) cs.prompt += ". ";
            cs.prompt += items[j].sequence;
        }
    }
    return cs;
}

inline std::string candidate_supporting_prompt(const TrainingTextIndex& index,
                                               const std::vector<std::string>& candidate_sequences,
                                               int32_t k_c, double theta) {
    return candidate_support(index, candidate_sequences, k_c, theta).prompt;
}

}  // namespace kgrank
