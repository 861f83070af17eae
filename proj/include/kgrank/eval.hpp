#pragma once
// Filtered link-prediction metrics, merge of re-ranked top-K lists back into
// the full candidate ordering, and cluster-level evaluation for open KGs.

#include <algorithm>
#include <iomanip>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "kgrank/decode.hpp"
#include "kgrank/kg.hpp"
#include "kgrank/kge.hpp"
#include "kgrank/rerank.hpp"
#include "kgrank/retriever.hpp"
#include "kgrank/verbalizer.hpp"

namespace kgrank {

struct RankingMetrics {
    double mr = 0.0;
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits3 = 0.0;
    double hits10 = 0.0;
    int64_t n_queries = 0;
};

inline RankingMetrics metrics_from_ranks(const std::vector<int64_t>& ranks) {
    require(!ranks.empty(), "metrics: no query ranks");
    RankingMetrics m;
    m.n_queries = static_cast<int64_t>(ranks.size());
    for (int64_t r : ranks) {
        require(r >= 1, "metrics: rank must be at least 1");
        m.mr += static_cast<double>(r);
        m.mrr += 1.0 / static_cast<double>(r);
        m.hits1 += r <= 1 ? 1.0 : 0.0;
        m.hits3 += r <= 3 ? 1.0 : 0.0;
        m.hits10 += r <= 10 ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(m.n_queries);
    m.mr /= n;
    m.mrr /= n;
    m.hits1 /= n;
    m.hits3 /= n;
    m.hits10 /= n;
    return m;
}

inline nlohmann::ordered_json metrics_to_json(const RankingMetrics& m) {
    nlohmann::ordered_json j;
    j["mr"] = m.mr;
    j["mrr"] = m.mrr;
    j["hits1"] = m.hits1;
    j["hits3"] = m.hits3;
    j["hits10"] = m.hits10;
    j["n_queries"] = m.n_queries;
    return j;
}

inline std::string metrics_table(const RankingMetrics& m) {
    std::ostringstream os;
    os << std::left << std::setw(10) << "metric" << std::right << std::setw(12) << "value"
       << "\n";
    auto row = [&](const char* name, double v, int prec) {
        os << std::left << std::setw(10) << name << std::right << std::setw(12)
           << std::fixed << std::setprecision(prec) << v << "\n";
    };
    row("MR", m.mr, 2);
    row("MRR", m.mrr, 4);
    row("Hits@1", m.hits1, 4);
    row("Hits@3", m.hits3, 4);
    row("Hits@10", m.hits10, 4);
    os << std::left << std::setw(10) << "queries" << std::right << std::setw(12)
       << m.n_queries << "\n";
    return os.str();
}

// Full entity ordering by descending score, ties by ascending entity index.
inline std::vector<EntityId> full_ordering(const std::vector<double>& scores) {
    std::vector<EntityId> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](EntityId a, EntityId b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return order;
}

// Replaces the head of the first-stage ordering with the re-ranked candidate
// order; everything beyond the candidate window is untouched.
inline std::vector<EntityId> rerank_merge(const std::vector<EntityId>& first_stage,
                                          const std::vector<EntityId>& candidates,
                                          const std::vector<int32_t>& perm) {
    const size_t k = candidates.size();
    require(perm.size() == k, "rerank merge: permutation size mismatch");
    require(first_stage.size() >= k, "rerank merge: ordering shorter than candidate list");
    {
        std::vector<EntityId> a(first_stage.begin(), first_stage.begin() + k);
        std::vector<EntityId> b = candidates;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        require(a == b, "rerank merge: candidates must be the top of the first stage");
    }
    std::vector<EntityId> out = first_stage;
    for (size_t t = 0; t < k; ++t) {
        int32_t pos = perm[t];
        require(pos >= 1 && pos <= static_cast<int32_t>(k), "rerank merge: bad permutation");
        out[t] = candidates[pos - 1];
    }
    return out;
}

// Rank of gold after removing every other known-true answer from the ordering.
inline int64_t filtered_rank(const std::vector<EntityId>& ordering, EntityId gold,
                             const std::unordered_set<EntityId>* filter_set) {
    int64_t rank = 1;
    for (EntityId e : ordering) {
        if (e == gold) return rank;
        if (filter_set && filter_set->count(e)) continue;
        ++rank;
    }
    fail("filtered rank: gold entity missing from ordering");
}

// Open-KG convention: the rank of a gold cluster is the best filtered rank
// over its member entities.
inline int64_t cluster_rank(const std::vector<EntityId>& ordering, EntityId gold,
                            const std::vector<int32_t>& cluster_of,
                            const std::unordered_set<EntityId>* filter_set) {
    require(!cluster_of.empty(), "cluster rank: no cluster data");
    const int32_t target_cluster = cluster_of[gold];
    int64_t best = -1;
    for (EntityId e = 0; e < static_cast<EntityId>(cluster_of.size()); ++e) {
        if (cluster_of[e] != target_cluster) continue;
        int64_t r = filtered_rank(ordering, e, filter_set);
        if (best < 0 || r < best) best = r;
    }
    require(best >= 1, "cluster rank: empty gold cluster");
    return best;
}

// ---------------------------------------------------------------------------
// Candidate scoring strategies

// Everything a second-stage scorer may look at for one query.
struct PresentedCandidates {
    std::string query_text;
    std::vector<std::string> pieces;
    std::vector<double> evidence;
    std::vector<double> kge_scores;
};

class CandidateScorer {
public:
    virtual ~CandidateScorer() = default;
    virtual std::vector<double> score(const PresentedCandidates& pc) const = 0;
};

class ModelScorer final : public CandidateScorer {
public:
    explicit ModelScorer(const RerankerModel& m) : m_(&m) {}
    std::vector<double> score(const PresentedCandidates& pc) const override {
        return reranker_logits(*m_, pc.query_text, pc.pieces, pc.evidence);
    }

private:
    const RerankerModel* m_;
};

// Echoes the first-stage scores; re-ranking with it is a no-op.
class IdentityScorer final : public CandidateScorer {
public:
    std::vector<double> score(const PresentedCandidates& pc) const override {
        return pc.kge_scores;
    }
};

// ---------------------------------------------------------------------------
// Evaluation driver

struct EvalOptions {
    int32_t k = 10;
    Toggles toggles;
    int32_t k_q = 3;
    int32_t k_c = 3;
    double theta = 0.8;
    std::shared_ptr<const TextEmbedder> embedder;  // defaults to HashedEmbedder when needed
};

// Emits K identifier slots greedily with no mask, the way an unconstrained
// generator would; with slot-independent logits this repeats the argmax.
inline std::string unconstrained_greedy_text(const std::vector<double>& logits) {
    const int32_t k = static_cast<int32_t>(logits.size());
    std::string out;
    for (int32_t slot = 0; slot < k; ++slot) {
        int32_t best = 0;
        for (int32_t i = 1; i < k; ++i)
            if (logits[i] > logits[best]) best = i;
        if (slot) out += " ";
        out += option_identifier(best);
    }
    return out;
}

// Turns a parse diagnosis into a usable candidate ordering: a clean parse is
// taken as-is; a flawed one keeps the recognized identifiers in order of
// first appearance and appends the rest in presented order.
inline std::vector<int32_t> ordering_from_diagnosis(const ParseDiagnosis& d, int32_t k) {
    if (d.outcome == ParseOutcome::Ok) return d.permutation;
    std::vector<int32_t> perm;
    std::vector<char> used(k, 0);
    for (int32_t idx : d.recognized) {
        perm.push_back(idx + 1);
        used[idx] = 1;
    }
    for (int32_t i = 0; i < k; ++i)
        if (!used[i]) perm.push_back(i + 1);
    return perm;
}

// Filtered rank of every test query, both directions, in deterministic order
// (triple index major, tail before head).  scorer == nullptr or all rerank
// toggles off yields pure first-stage behavior.
inline std::vector<int64_t> evaluate_ranks(const KnowledgeGraph& kg, const KgeModel& kge,
                                           const CandidateScorer* scorer,
                                           const EvalOptions& opts) {
    require(!kg.test.empty(), "evaluate: empty test split");
    require(opts.k >= 1, "evaluate: K must be at least 1");
    const auto filter = build_filter_index(kg);
    const bool rerank = scorer != nullptr && opts.toggles.any_rerank();
    const bool wants_prompts = rerank && (opts.toggles.qp || opts.toggles.cp);

    TrainingTextIndex index;
    if (wants_prompts) {
        auto emb = opts.embedder ? opts.embedder : std::make_shared<const HashedEmbedder>();
        index = build_index(kg, emb);
    }

    const int64_t n_queries = static_cast<int64_t>(kg.test.size()) * 2;
    std::vector<int64_t> ranks(n_queries);
    const int threads = thread_count_from_env();

    parallel_for(n_queries, threads, [&](int64_t qi) {
        const Triple& t = kg.test[qi / 2];
        const bool tail_dir = (qi % 2) == 0;
        Query q{tail_dir ? t.head : t.tail, t.rel,
                tail_dir ? Direction::Tail : Direction::Head};
        EntityId gold = tail_dir ? t.tail : t.head;

        auto scores = kge_score_all(kge, q, 1);
        auto ordering = full_ordering(scores);

        if (rerank) {
            const int32_t k = std::min<int32_t>(opts.k, static_cast<int32_t>(ordering.size()));
            std::vector<EntityId> cands(ordering.begin(), ordering.begin() + k);

            auto x_q = make_query_sequence(kg, q);
            PresentedCandidates pc;
            pc.query_text = decorate_query(kg, q, x_q, opts.toggles.dp);
            pc.pieces.reserve(k);
            std::vector<std::string> cand_seqs;
            for (EntityId e : cands) {
                const std::string& label = kg.entity_labels[e];
                pc.pieces.push_back(opts.toggles.qci ? fill_blank(x_q, label) : label);
                if (opts.toggles.cp) cand_seqs.push_back(fill_blank(x_q, label));
            }
            pc.evidence.assign(k, 0.0);
            pc.kge_scores.resize(k);
            for (int32_t i = 0; i < k; ++i) pc.kge_scores[i] = scores[cands[i]];
            if (opts.toggles.qp) {
                auto related = query_related_prompt(index, x_q, opts.k_q);
                if (!related.empty()) pc.query_text += " " + related;
            }
            if (opts.toggles.cp) {
                auto cs = candidate_support(index, cand_seqs, opts.k_c, opts.theta);
                pc.evidence = cs.max_similarity;
            }

            auto logits = scorer->score(pc);
            require(static_cast<int32_t>(logits.size()) == k, "scorer returned wrong logit count");
            std::vector<int32_t> perm;
            if (opts.toggles.cg) {
                perm = constrained_greedy_decode(
                    [&](const DecodeState&) { return logits; }, k);
            } else {
                auto text = unconstrained_greedy_text(logits);
                perm = ordering_from_diagnosis(parse_ranking(text, k), k);
            }
            ordering = rerank_merge(ordering, cands, perm);
        }

        const auto* fset = filter.answers(q);
        ranks[qi] = (kg.kind == DatasetKind::Open && kg.has_clusters())
                        ? cluster_rank(ordering, gold, kg.cluster_of, fset)
                        : filtered_rank(ordering, gold, fset);
    });
    return ranks;
}

inline RankingMetrics evaluate(const KnowledgeGraph& kg, const KgeModel& kge,
                               const CandidateScorer* scorer, const EvalOptions& opts) {
    return metrics_from_ranks(evaluate_ranks(kg, kge, scorer, opts));
}

}  // namespace kgrank
