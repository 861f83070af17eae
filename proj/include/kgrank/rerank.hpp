#pragma once
// Second-stage re-ranker: joint objective (sequential cross entropy plus a
// hinge ranking term against first-stage scores), training-sample
// construction from first-stage top-K lists, and a compact trainable scorer
// that emits one logit per option identifier.

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgrank/kg.hpp"
#include "kgrank/kge.hpp"
#include "kgrank/types.hpp"
#include "kgrank/util.hpp"
#include "kgrank/verbalizer.hpp"

namespace kgrank {

// ---------------------------------------------------------------------------
// Losses

struct LossConfig {
    double lambda = 0.1;  // weight of the ranking term, in [0,1]
    double C = 100.0;     // fixed scale of the ranking term
    int32_t k = 10;       // candidate count; C/k^2 = 1 exactly at k = 10
};

struct ScaledProbs {
    std::vector<double> values;
};

constexpr double kMinmaxDegenerate = 1e-12;

// (s - min)/(max - min); an all-equal vector maps to all 0.5.
inline ScaledProbs minmax_scale(const std::vector<double>& scores) {
    require(!scores.empty(), "minmax: empty input");
    auto [mn_it, mx_it] = std::minmax_element(scores.begin(), scores.end());
    double mn = *mn_it, mx = *mx_it;
    ScaledProbs out;
    out.values.resize(scores.size());
    if (mx - mn < kMinmaxDegenerate) {
        std::fill(out.values.begin(), out.values.end(), 0.5);
        return out;
    }
    for (size_t i = 0; i < scores.size(); ++i) out.values[i] = (scores[i] - mn) / (mx - mn);
    return out;
}

// Chain rule through minmax_scale: adds d(loss)/d(raw) to gz given
// d(loss)/d(scaled).  First occurrence wins for argmin/argmax; the degenerate
// case has zero gradient.
inline void minmax_backward(const std::vector<double>& raw, const std::vector<double>& gp,
                            std::vector<double>& gz) {
    require(raw.size() == gp.size() && raw.size() == gz.size(), "minmax backward size mismatch");
    auto [mn_it, mx_it] = std::minmax_element(raw.begin(), raw.end());
    double r = *mx_it - *mn_it;
    if (r < kMinmaxDegenerate) return;
    size_t imin = static_cast<size_t>(mn_it - raw.begin());
    size_t imax = static_cast<size_t>(mx_it - raw.begin());
    double g_sum = 0.0, gp_dot = 0.0;
    for (size_t i = 0; i < raw.size(); ++i) {
        double p = (raw[i] - *mn_it) / r;
        g_sum += gp[i];
        gp_dot += gp[i] * p;
        gz[i] += gp[i] / r;
    }
    gz[imin] += (gp_dot - g_sum) / r;
    gz[imax] -= gp_dot / r;
}

// (C/k^2) * sum over pairs with s*_i < s*_j of max(0, p_i - p_j).  Ties on
// the target side contribute nothing.
inline double ranking_loss(const ScaledProbs& p, const ScaledProbs& s_star,
                           const LossConfig& cfg, std::vector<double>* gp = nullptr) {
    const size_t k = p.values.size();
    require(s_star.values.size() == k, "ranking loss: size mismatch");
    require(static_cast<size_t>(cfg.k) == k, "ranking loss: config K mismatch");
    const double scale = cfg.C / (static_cast<double>(cfg.k) * cfg.k);
    if (gp) gp->assign(k, 0.0);
    double acc = 0.0;
    for (size_t i = 0; i < k; ++i) {
        for (size_t j = 0; j < k; ++j) {
            if (!(s_star.values[i] < s_star.values[j])) continue;
            double h = p.values[i] - p.values[j];
            if (h > 0.0) {
                acc += h;
                if (gp) {
                    (*gp)[i] += scale;
                    (*gp)[j] -= scale;
                }
            }
        }
    }
    return scale * acc;
}

// Sequential negative log-likelihood of emitting the target identifier order:
// at each slot a softmax over the identifiers not yet emitted.  target[t] is
// the 1-based candidate position ranked at place t.
inline double ce_loss(const std::vector<double>& z, const std::vector<int32_t>& target,
                      std::vector<double>* gz = nullptr) {
    const size_t k = z.size();
    require(target.size() == k, "ce loss: size mismatch");
    for (double v : z)
        if (!std::isfinite(v)) fail("ce loss: non-finite logit");
    {
        std::vector<char> seen(k, 0);
        for (int32_t p : target) {
            require(p >= 1 && p <= static_cast<int32_t>(k), "ce loss: target entry out of range");
            require(!seen[p - 1], "ce loss: target repeats a position");
            seen[p - 1] = 1;
        }
    }
    if (gz) gz->assign(k, 0.0);
    std::vector<char> emitted(k, 0);
    double nll = 0.0;
    for (size_t t = 0; t < k; ++t) {
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < k; ++i)
            if (!emitted[i]) mx = std::max(mx, z[i]);
        double denom = 0.0;
        for (size_t i = 0; i < k; ++i)
            if (!emitted[i]) denom += std::exp(z[i] - mx);
        const size_t pick = static_cast<size_t>(target[t] - 1);
        nll -= (z[pick] - mx) - std::log(denom);
        if (gz) {
            for (size_t i = 0; i < k; ++i) {
                if (emitted[i]) continue;
                double soft = std::exp(z[i] - mx) / denom;
                (*gz)[i] += soft - (i == pick ? 1.0 : 0.0);
            }
        }
        emitted[pick] = 1;
    }
    return nll;
}

struct LossParts {
    double ce = 0.0;
    double rank = 0.0;
    double total = 0.0;
};

// ce + lambda * rank, with P = minmax(z) and S* = minmax(first-stage scores).
// When gz is given it receives d(total)/d(z).
inline LossParts joint_loss(const std::vector<double>& z, const std::vector<double>& kge_scores,
                            const std::vector<int32_t>& target, const LossConfig& cfg,
                            std::vector<double>* gz = nullptr) {
    require(z.size() == kge_scores.size(), "joint loss: size mismatch");
    LossParts parts;
    if (gz) gz->assign(z.size(), 0.0);
    parts.ce = ce_loss(z, target, gz);
    auto p = minmax_scale(z);
    auto s_star = minmax_scale(kge_scores);
    std::vector<double> gp;
    parts.rank = ranking_loss(p, s_star, cfg, gz ? &gp : nullptr);
    if (gz) {
        for (double& g : gp) g *= cfg.lambda;
        minmax_backward(z, gp, *gz);
    }
    parts.total = parts.ce + cfg.lambda * parts.rank;
    return parts;
}

// ---------------------------------------------------------------------------
// Training samples

struct RerankSample {
    int32_t query_id = 0;
    Direction dir = Direction::Tail;
    EntityId known = 0;
    RelationId rel = 0;
    EntityId gold = 0;
    std::vector<EntityId> entities;        // candidates in shuffled presentation order
    std::vector<double> kge_scores;        // aligned with entities
    std::vector<int32_t> target;           // 1-based positions, rank order
    int32_t gold_pos = 0;                  // 1-based position of gold, 0 when absent
    std::string query_text;
    std::vector<std::string> piece_texts;  // aligned with entities
    std::vector<double> evidence;          // aligned; zero in training samples

    int32_t k() const { return static_cast<int32_t>(entities.size()); }

    PromptBundle bundle() const {
        PromptBundle b;
        b.x_q = query_text;
        for (size_t i = 0; i < piece_texts.size(); ++i) {
            if (i) b.x_c += " ";
            b.x_c += option_identifier(static_cast<int32_t>(i)) + ". " + piece_texts[i];
        }
        return b;
    }
};

struct SampleSet {
    std::vector<RerankSample> samples;
    double gold_absent_fraction = 0.0;
};

// Rank order over candidates: descending score, ties by earlier position.
inline std::vector<int32_t> score_sort_target(const std::vector<double>& scores) {
    std::vector<int32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    for (int32_t& p : order) ++p;
    return order;
}

// Builds one sample for one training query.  The candidate presentation
// order is shuffled with randomness keyed by (seed, query content) so the
// result does not depend on triple file order.
inline RerankSample build_sample(const KnowledgeGraph& kg, const KgeModel& kge, const Query& q,
                                 EntityId gold, int32_t k, uint64_t seed, const Toggles& toggles,
                                 int32_t query_id) {
    auto scores = kge_score_all(kge, q);
    auto top = topk(scores, k, true);
    const int32_t kk = static_cast<int32_t>(top.size());

    std::string key = (q.dir == Direction::Tail ? "T:" : "H:") + std::to_string(q.known) + ":" +
                      std::to_string(q.rel);
    Rng rng(mix_seed(seed, fnv1a64(key)));
    std::vector<int32_t> perm(kk);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);

    RerankSample s;
    s.query_id = query_id;
    s.dir = q.dir;
    s.known = q.known;
    s.rel = q.rel;
    s.gold = gold;
    s.entities.resize(kk);
    s.kge_scores.resize(kk);
    for (int32_t i = 0; i < kk; ++i) {
        s.entities[i] = top[perm[i]].entity;
        s.kge_scores[i] = top[perm[i]].score;
    }
    s.target = score_sort_target(s.kge_scores);
    for (int32_t i = 0; i < kk; ++i)
        if (s.entities[i] == gold) s.gold_pos = i + 1;
    if (toggles.gold_first && s.gold_pos > 0) {
        auto& t = s.target;
        auto it = std::find(t.begin(), t.end(), s.gold_pos);
        t.erase(it);
        t.insert(t.begin(), s.gold_pos);
    }

    auto x_q = make_query_sequence(kg, q);
    s.query_text = decorate_query(kg, q, x_q, toggles.dp);
    s.piece_texts.resize(kk);
    for (int32_t i = 0; i < kk; ++i) {
        const std::string& label = kg.entity_labels[s.entities[i]];
        s.piece_texts[i] = toggles.qci ? fill_blank(x_q, label) : label;
    }
    s.evidence.assign(kk, 0.0);
    return s;
}

// Two samples per training triple, querying each direction.  Retrieval
// prompts are deliberately absent here: they augment inference inputs only,
// so training samples always carry zero evidence and undecorated query text
// beyond the dp definitions.
inline SampleSet build_training_samples(const KnowledgeGraph& kg, const KgeModel& kge, int32_t k,
                                        uint64_t seed, const Toggles& toggles) {
    SampleSet set;
    set.samples.reserve(kg.train.size() * 2);
    int64_t absent = 0;
    int32_t query_id = 0;
    for (const auto& t : kg.train) {
        for (int dir = 0; dir < 2; ++dir) {
            Query q{dir == 0 ? t.head : t.tail, t.rel,
                    dir == 0 ? Direction::Tail : Direction::Head};
            EntityId gold = dir == 0 ? t.tail : t.head;
            set.samples.push_back(build_sample(kg, kge, q, gold, k, seed, toggles, query_id++));
            if (set.samples.back().gold_pos == 0) ++absent;
        }
    }
    if (!set.samples.empty())
        set.gold_absent_fraction = static_cast<double>(absent) / set.samples.size();
    return set;
}

inline nlohmann::ordered_json sample_to_json(const RerankSample& s) {
    nlohmann::ordered_json j;
    j["query_id"] = s.query_id;
    j["dir"] = s.dir == Direction::Tail ? "tail" : "head";
    j["known"] = s.known;
    j["rel"] = s.rel;
    j["gold"] = s.gold;
    j["entities"] = s.entities;
    j["kge_scores"] = s.kge_scores;
    j["target"] = s.target;
    j["gold_pos"] = s.gold_pos;
    j["query_text"] = s.query_text;
    j["pieces"] = s.piece_texts;
    j["evidence"] = s.evidence;
    return j;
}

inline RerankSample sample_from_json(const nlohmann::json& j) {
    RerankSample s;
    s.query_id = j.at("query_id").get<int32_t>();
    std::string dir = j.at("dir").get<std::string>();
    require(dir == "tail" || dir == "head", "sample: dir must be tail or head");
    s.dir = dir == "tail" ? Direction::Tail : Direction::Head;
    s.known = j.at("known").get<EntityId>();
    s.rel = j.at("rel").get<RelationId>();
    s.gold = j.at("gold").get<EntityId>();
    s.entities = j.at("entities").get<std::vector<EntityId>>();
    s.kge_scores = j.at("kge_scores").get<std::vector<double>>();
    s.target = j.at("target").get<std::vector<int32_t>>();
    s.gold_pos = j.at("gold_pos").get<int32_t>();
    s.query_text = j.at("query_text").get<std::string>();
    s.piece_texts = j.at("pieces").get<std::vector<std::string>>();
    s.evidence = j.at("evidence").get<std::vector<double>>();
    require(s.entities.size() == s.kge_scores.size() && s.entities.size() == s.target.size() &&
                s.entities.size() == s.piece_texts.size() &&
                s.entities.size() == s.evidence.size(),
            "sample: field lengths disagree");
    return s;
}

inline void save_samples(const std::vector<RerankSample>& samples, const std::string& path) {
    std::ofstream os(path);
    require(bool(os), "cannot write " + path);
    for (const auto& s : samples) os << sample_to_json(s).dump() << '\n';
}

inline std::vector<RerankSample> load_samples(const std::string& path) {
    std::ifstream is(path);
    require(bool(is), "cannot read " + path);
    std::vector<RerankSample> out;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        require(!j.is_discarded(),
                path + ":" + std::to_string(lineno) + ": malformed sample JSON");
        out.push_back(sample_from_json(j));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Built-in scorer

constexpr uint32_t kRerankMagic = 0x3152524Bu;  // "KRR1"
constexpr uint32_t kRerankVersion = 1;

struct RerankerModel {
    int32_t vocab = 2048;
    int32_t d_r = 32;
    // Training-time metadata, carried in the checkpoint.
    int32_t k_train = 0;
    double lambda = 0.0;
    bool qci = true;
    bool dp = false;

    std::vector<double> token_emb;  // vocab x d_r
    std::vector<double> wq, bq;     // d_r x d_r, d_r  (query encoder)
    std::vector<double> wc, bc;     // d_r x d_r, d_r  (candidate encoder)
    std::vector<double> wh, bh;     // d_r x (2 d_r + 1), d_r  (score head)
    std::vector<double> u;          // d_r

    template <typename Fn>
    void for_each_param(Fn&& fn) {
        fn(token_emb);
        fn(wq);
        fn(bq);
        fn(wc);
        fn(bc);
        fn(wh);
        fn(bh);
        fn(u);
    }
};

inline RerankerModel reranker_init(int32_t vocab, int32_t d_r, uint64_t seed) {
    require(vocab > 0 && d_r > 0, "reranker: dims must be positive");
    RerankerModel m;
    m.vocab = vocab;
    m.d_r = d_r;
    Rng rng(mix_seed(seed, 0x7272u));
    auto fill = [&](std::vector<double>& v, size_t n) {
        v.resize(n);
        for (auto& x : v) x = rng.uniform(-0.1, 0.1);
    };
    fill(m.token_emb, static_cast<size_t>(vocab) * d_r);
    fill(m.wq, static_cast<size_t>(d_r) * d_r);
    fill(m.bq, d_r);
    fill(m.wc, static_cast<size_t>(d_r) * d_r);
    fill(m.bc, d_r);
    fill(m.wh, static_cast<size_t>(d_r) * (2 * d_r + 1));
    fill(m.bh, d_r);
    fill(m.u, d_r);
    // The evidence column starts at zero: training samples carry zero
    // evidence, so this weight sees no gradient, and a random stale value
    // would perturb inference where evidence is populated.
    const int32_t vin = 2 * d_r + 1;
    for (int32_t i = 0; i < d_r; ++i) m.wh[static_cast<size_t>(i) * vin + (vin - 1)] = 0.0;
    return m;
}

struct RerankerGrad {
    std::vector<double> token_emb, wq, bq, wc, bc, wh, bh, u;

    explicit RerankerGrad(const RerankerModel& m)
        : token_emb(m.token_emb.size(), 0.0),
          wq(m.wq.size(), 0.0),
          bq(m.bq.size(), 0.0),
          wc(m.wc.size(), 0.0),
          bc(m.bc.size(), 0.0),
          wh(m.wh.size(), 0.0),
          bh(m.bh.size(), 0.0),
          u(m.u.size(), 0.0) {}

    void zero() {
        auto z = [](std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); };
        z(token_emb);
        z(wq);
        z(bq);
        z(wc);
        z(bc);
        z(wh);
        z(bh);
        z(u);
    }
};

inline std::vector<int32_t> hash_tokens(const std::string& text, int32_t vocab) {
    auto toks = tokenize(text);
    std::vector<int32_t> ids;
    ids.reserve(toks.size());
    for (const auto& t : toks) ids.push_back(static_cast<int32_t>(fnv1a64(t) % vocab));
    return ids;
}

namespace detail {

struct EncodedText {
    std::vector<int32_t> tokens;
    std::vector<double> pooled;  // mean token embedding
    std::vector<double> enc;     // tanh(W pooled + b)
};

inline EncodedText encode_text(const RerankerModel& m, const std::string& text,
                               const std::vector<double>& w, const std::vector<double>& b) {
    const int32_t d = m.d_r;
    EncodedText out;
    out.tokens = hash_tokens(text, m.vocab);
    out.pooled.assign(d, 0.0);
    if (!out.tokens.empty()) {
        for (int32_t tid : out.tokens) {
            const double* row = m.token_emb.data() + static_cast<size_t>(tid) * d;
            for (int32_t i = 0; i < d; ++i) out.pooled[i] += row[i];
        }
        for (double& x : out.pooled) x /= static_cast<double>(out.tokens.size());
    }
    out.enc.resize(d);
    for (int32_t i = 0; i < d; ++i) {
        double a = b[i];
        const double* wrow = w.data() + static_cast<size_t>(i) * d;
        for (int32_t j = 0; j < d; ++j) a += wrow[j] * out.pooled[j];
        out.enc[i] = std::tanh(a);
    }
    return out;
}

// d(loss)/d(enc) -> accumulates into W, b, token embeddings.
inline void encode_backward(const RerankerModel& m, const EncodedText& e,
                            const std::vector<double>& g_enc, const std::vector<double>& w,
                            std::vector<double>& gw, std::vector<double>& gb,
                            std::vector<double>& g_token_emb) {
    const int32_t d = m.d_r;
    std::vector<double> da(d);
    for (int32_t i = 0; i < d; ++i) da[i] = g_enc[i] * (1.0 - e.enc[i] * e.enc[i]);
    std::vector<double> g_pooled(d, 0.0);
    for (int32_t i = 0; i < d; ++i) {
        gb[i] += da[i];
        double* gwrow = gw.data() + static_cast<size_t>(i) * d;
        const double* wrow = w.data() + static_cast<size_t>(i) * d;
        for (int32_t j = 0; j < d; ++j) {
            gwrow[j] += da[i] * e.pooled[j];
            g_pooled[j] += da[i] * wrow[j];
        }
    }
    if (!e.tokens.empty()) {
        const double inv = 1.0 / static_cast<double>(e.tokens.size());
        for (int32_t tid : e.tokens) {
            double* grow = g_token_emb.data() + static_cast<size_t>(tid) * d;
            for (int32_t j = 0; j < d; ++j) grow[j] += g_pooled[j] * inv;
        }
    }
}

struct ForwardCache {
    EncodedText query;
    std::vector<EncodedText> cands;
    std::vector<std::vector<double>> head_tanh;  // per candidate, tanh(Wh v + bh)
    std::vector<std::vector<double>> head_in;    // per candidate, v = [eq; ec; ev]
};

}  // namespace detail

// One logit per candidate: z_i = u . tanh(Wh [enc(query); enc(piece_i); ev_i] + bh).
inline std::vector<double> reranker_logits(const RerankerModel& m, const std::string& query_text,
                                           const std::vector<std::string>& pieces,
                                           const std::vector<double>& evidence,
                                           detail::ForwardCache* cache = nullptr) {
    require(pieces.size() == evidence.size(), "reranker: pieces/evidence size mismatch");
    require(!pieces.empty(), "reranker: no candidates");
    const int32_t d = m.d_r;
    const int32_t vin = 2 * d + 1;
    auto q = detail::encode_text(m, query_text, m.wq, m.bq);
    std::vector<double> logits(pieces.size());
    if (cache) {
        cache->query = q;
        cache->cands.resize(pieces.size());
        cache->head_tanh.resize(pieces.size());
        cache->head_in.resize(pieces.size());
    }
    for (size_t ci = 0; ci < pieces.size(); ++ci) {
        auto c = detail::encode_text(m, pieces[ci], m.wc, m.bc);
        std::vector<double> v(vin);
        std::copy(q.enc.begin(), q.enc.end(), v.begin());
        std::copy(c.enc.begin(), c.enc.end(), v.begin() + d);
        v[2 * d] = evidence[ci];
        std::vector<double> t(d);
        double z = 0.0;
        for (int32_t i = 0; i < d; ++i) {
            double a = m.bh[i];
            const double* wrow = m.wh.data() + static_cast<size_t>(i) * vin;
            for (int32_t j = 0; j < vin; ++j) a += wrow[j] * v[j];
            t[i] = std::tanh(a);
            z += m.u[i] * t[i];
        }
        logits[ci] = z;
        if (cache) {
            cache->cands[ci] = std::move(c);
            cache->head_tanh[ci] = std::move(t);
            cache->head_in[ci] = std::move(v);
        }
    }
    return logits;
}

// Accumulates d(loss)/d(params) given d(loss)/d(logits).
inline void reranker_backward(const RerankerModel& m, const detail::ForwardCache& cache,
                              const std::vector<double>& gz, RerankerGrad& grad) {
    const int32_t d = m.d_r;
    const int32_t vin = 2 * d + 1;
    std::vector<double> g_query_enc(d, 0.0);
    for (size_t ci = 0; ci < cache.cands.size(); ++ci) {
        const double g = gz[ci];
        if (g == 0.0) continue;
        const auto& t = cache.head_tanh[ci];
        const auto& v = cache.head_in[ci];
        std::vector<double> da(d);
        for (int32_t i = 0; i < d; ++i) {
            grad.u[i] += g * t[i];
            da[i] = g * m.u[i] * (1.0 - t[i] * t[i]);
        }
        std::vector<double> gv(vin, 0.0);
        for (int32_t i = 0; i < d; ++i) {
            grad.bh[i] += da[i];
            double* gwrow = grad.wh.data() + static_cast<size_t>(i) * vin;
            const double* wrow = m.wh.data() + static_cast<size_t>(i) * vin;
            for (int32_t j = 0; j < vin; ++j) {
                gwrow[j] += da[i] * v[j];
                gv[j] += da[i] * wrow[j];
            }
        }
        for (int32_t i = 0; i < d; ++i) g_query_enc[i] += gv[i];
        std::vector<double> g_c(gv.begin() + d, gv.begin() + 2 * d);
        detail::encode_backward(m, cache.cands[ci], g_c, m.wc, grad.wc, grad.bc, grad.token_emb);
    }
    detail::encode_backward(m, cache.query, g_query_enc, m.wq, grad.wq, grad.bq, grad.token_emb);
}

// Loss of one sample under the current model; fills parameter gradients when
// grad is non-null.
inline LossParts sample_loss(const RerankerModel& m, const RerankSample& s, double lambda,
                             RerankerGrad* grad = nullptr) {
    LossConfig cfg;
    cfg.lambda = lambda;
    cfg.k = s.k();
    detail::ForwardCache cache;
    auto z = reranker_logits(m, s.query_text, s.piece_texts, s.evidence,
                             grad ? &cache : nullptr);
    std::vector<double> gz;
    auto parts = joint_loss(z, s.kge_scores, s.target, cfg, grad ? &gz : nullptr);
    if (grad) reranker_backward(m, cache, gz, *grad);
    return parts;
}

// ---------------------------------------------------------------------------
// Training

struct RerankTrainConfig {
    int32_t epochs = 3;
    int32_t batch = 16;
    double lr = 1e-4;
    double lambda = 0.1;
    uint64_t seed = 1;
};

struct EpochLog {
    int32_t epoch;
    double ce;
    double rank_loss;
    double total;
};

// Plain mini-batch gradient descent, deterministic given the seed.  Returns
// one log entry per epoch with mean loss components over all samples.
inline std::vector<EpochLog> train_reranker(RerankerModel& m,
                                            const std::vector<RerankSample>& samples,
                                            const RerankTrainConfig& cfg) {
    require(!samples.empty(), "reranker training: no samples");
    require(cfg.batch >= 1, "reranker training: batch must be at least 1");
    std::vector<EpochLog> log;
    std::vector<int32_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    RerankerGrad grad(m);
    for (int32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(mix_seed(cfg.seed, 0x626174u + epoch));
        rng.shuffle(order);
        double ce = 0.0, rank = 0.0, total = 0.0;
        for (size_t start = 0; start < order.size(); start += cfg.batch) {
            size_t end = std::min(order.size(), start + cfg.batch);
            grad.zero();
            for (size_t i = start; i < end; ++i) {
                auto parts = sample_loss(m, samples[order[i]], cfg.lambda, &grad);
                ce += parts.ce;
                rank += parts.rank;
                total += parts.total;
            }
            const double scale = cfg.lr / static_cast<double>(end - start);
            auto step = [&](std::vector<double>& p, const std::vector<double>& g) {
                for (size_t i = 0; i < p.size(); ++i) p[i] -= scale * g[i];
            };
            step(m.token_emb, grad.token_emb);
            step(m.wq, grad.wq);
            step(m.bq, grad.bq);
            step(m.wc, grad.wc);
            step(m.bc, grad.bc);
            step(m.wh, grad.wh);
            step(m.bh, grad.bh);
            step(m.u, grad.u);
        }
        const double n = static_cast<double>(samples.size());
        EpochLog e{epoch, ce / n, rank / n, total / n};
        if (!std::isfinite(e.total)) fail("reranker training diverged at epoch " +
                                          std::to_string(epoch));
        log.push_back(e);
    }
    return log;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline void reranker_save(const RerankerModel& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    require(bool(os), "cannot write " + path);
    write_u32(os, kRerankMagic);
    write_u32(os, kRerankVersion);
    write_u64(os, static_cast<uint64_t>(m.vocab));
    write_u64(os, static_cast<uint64_t>(m.d_r));
    write_u64(os, static_cast<uint64_t>(m.k_train));
    write_u64(os, std::bit_cast<uint64_t>(m.lambda));
    write_u32(os, m.qci ? 1 : 0);
    write_u32(os, m.dp ? 1 : 0);
    write_f64_block(os, m.token_emb);
    write_f64_block(os, m.wq);
    write_f64_block(os, m.bq);
    write_f64_block(os, m.wc);
    write_f64_block(os, m.bc);
    write_f64_block(os, m.wh);
    write_f64_block(os, m.bh);
    write_f64_block(os, m.u);
    require(bool(os), "write failed: " + path);
}

inline RerankerModel reranker_load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(bool(is), "cannot read " + path);
    require(read_u32(is) == kRerankMagic, path + ": not a re-ranker checkpoint");
    require(read_u32(is) == kRerankVersion, path + ": unsupported checkpoint version");
    RerankerModel m;
    m.vocab = static_cast<int32_t>(read_u64(is));
    m.d_r = static_cast<int32_t>(read_u64(is));
    m.k_train = static_cast<int32_t>(read_u64(is));
    m.lambda = std::bit_cast<double>(read_u64(is));
    m.qci = read_u32(is) != 0;
    m.dp = read_u32(is) != 0;
    const size_t d = static_cast<size_t>(m.d_r);
    read_f64_block(is, m.token_emb, static_cast<size_t>(m.vocab) * d);
    read_f64_block(is, m.wq, d * d);
    read_f64_block(is, m.bq, d);
    read_f64_block(is, m.wc, d * d);
    read_f64_block(is, m.bc, d);
    read_f64_block(is, m.wh, d * (2 * d + 1));
    read_f64_block(is, m.bh, d);
    read_f64_block(is, m.u, d);
    require(bool(is), "truncated checkpoint: " + path);
    return m;
}

}  // namespace kgrank
