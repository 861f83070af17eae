#pragma once
// First-stage link predictor: bilinear model with a shared core tensor
// (entity d-vectors, relation d-vectors, d*d*d core), trained with 1-N
// binary cross entropy over all entities and Adagrad updates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "kgrank/kg.hpp"
#include "kgrank/types.hpp"
#include "kgrank/util.hpp"

namespace kgrank {

constexpr uint32_t kKgeMagic = 0x3145474Bu;  // "KGE1"
constexpr uint32_t kKgeVersion = 1;

struct KgeModel {
    int32_t d = 0;
    int64_t n_entities = 0;
    int64_t n_relations = 0;
    std::vector<double> entity_emb;    // n_entities x d, row-major
    std::vector<double> relation_emb;  // n_relations x d, row-major
    std::vector<double> core;          // d x d x d, [a][b][c] at (a*d + b)*d + c

    double* ent(int64_t e) { return entity_emb.data() + e * d; }
    const double* ent(int64_t e) const { return entity_emb.data() + e * d; }
    double* rel(int64_t r) { return relation_emb.data() + r * d; }
    const double* rel(int64_t r) const { return relation_emb.data() + r * d; }
};

inline KgeModel kge_init(int64_t n_entities, int64_t n_relations, int32_t d, uint64_t seed) {
    require(d > 0, "kge: embedding dim must be positive");
    KgeModel m;
    m.d = d;
    m.n_entities = n_entities;
    m.n_relations = n_relations;
    Rng rng(mix_seed(seed, 0x6b6765u));
    auto fill = [&](std::vector<double>& v, size_t n) {
        v.resize(n);
        for (auto& x : v) x = rng.uniform(-0.1, 0.1);
    };
    fill(m.entity_emb, static_cast<size_t>(n_entities) * d);
    fill(m.relation_emb, static_cast<size_t>(n_relations) * d);
    fill(m.core, static_cast<size_t>(d) * d * d);
    return m;
}

inline double stable_sigmoid(double x) {
    x = std::clamp(x, -30.0, 30.0);
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

namespace detail {

// Contracts the core with the known entity and the relation, leaving the
// candidate axis free.  Tail queries leave axis c free, head queries axis a.
inline void kge_context(const KgeModel& m, const Query& q, std::vector<double>& t1,
                        std::vector<double>& ctx) {
    const int32_t d = m.d;
    const double* ek = m.ent(q.known);
    const double* er = m.rel(q.rel);
    t1.assign(static_cast<size_t>(d) * d, 0.0);
    ctx.assign(d, 0.0);
    if (q.dir == Direction::Tail) {
        // t1[b][c] = sum_a core[a][b][c] * ek[a];  ctx[c] = sum_b t1[b][c] * er[b]
        for (int32_t a = 0; a < d; ++a) {
            const double ea = ek[a];
            if (ea == 0.0) continue;
            const double* slab = m.core.data() + static_cast<size_t>(a) * d * d;
            for (int32_t bc = 0; bc < d * d; ++bc) t1[bc] += ea * slab[bc];
        }
        for (int32_t b = 0; b < d; ++b) {
            const double rb = er[b];
            const double* row = t1.data() + static_cast<size_t>(b) * d;
            for (int32_t c = 0; c < d; ++c) ctx[c] += rb * row[c];
        }
    } else {
        // t1[a][b] = sum_c core[a][b][c] * ek[c];  ctx[a] = sum_b t1[a][b] * er[b]
        for (int32_t a = 0; a < d; ++a) {
            for (int32_t b = 0; b < d; ++b) {
                const double* row = m.core.data() + (static_cast<size_t>(a) * d + b) * d;
                double s = 0.0;
                for (int32_t c = 0; c < d; ++c) s += row[c] * ek[c];
                t1[static_cast<size_t>(a) * d + b] = s;
            }
        }
        for (int32_t a = 0; a < d; ++a) {
            const double* row = t1.data() + static_cast<size_t>(a) * d;
            double s = 0.0;
            for (int32_t b = 0; b < d; ++b) s += row[b] * er[b];
            ctx[a] = s;
        }
    }
}

}  // namespace detail

// Raw scores for every entity as candidate answer to q.  threads = 0 uses
// the environment-configured count; callers already inside a parallel region
// pass 1.
inline std::vector<double> kge_score_all(const KgeModel& m, const Query& q, int threads = 0) {
    std::vector<double> t1, ctx;
    detail::kge_context(m, q, t1, ctx);
    std::vector<double> scores(m.n_entities);
    const int32_t d = m.d;
    if (threads <= 0) threads = thread_count_from_env();
    parallel_for(m.n_entities, threads, [&](int64_t e) {
        const double* ee = m.ent(e);
        double s = 0.0;
        for (int32_t c = 0; c < d; ++c) s += ctx[c] * ee[c];
        scores[e] = s;
    });
    return scores;
}

struct ScoredEntity {
    EntityId entity;
    double score;
};

// Top K entries by score, ties broken by lower entity index.  With clamp set,
// K larger than the candidate pool returns the whole pool.
inline std::vector<ScoredEntity> topk(const std::vector<double>& scores, int32_t k,
                                      bool clamp = true) {
    const int64_t n = static_cast<int64_t>(scores.size());
    if (k > n) {
        require(clamp, "topk: k exceeds candidate count");
        k = static_cast<int32_t>(n);
    }
    std::vector<int32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto better = [&](int32_t a, int32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + k, order.end(), better);
    std::vector<ScoredEntity> out;
    out.reserve(k);
    for (int32_t i = 0; i < k; ++i) out.push_back({order[i], scores[order[i]]});
    return out;
}

// One training example in the 1-N setting: a query plus every entity that
// answers it in the train split.
struct QueryGroup {
    Query q;
    std::vector<EntityId> answers;
};

inline std::vector<QueryGroup> build_query_groups(const std::vector<Triple>& triples) {
    std::map<std::tuple<int, EntityId, RelationId>, std::vector<EntityId>> acc;
    for (const auto& t : triples) {
        acc[{0, t.head, t.rel}].push_back(t.tail);
        acc[{1, t.tail, t.rel}].push_back(t.head);
    }
    std::vector<QueryGroup> groups;
    groups.reserve(acc.size());
    for (auto& [key, answers] : acc) {
        auto [dir, known, rel] = key;
        std::sort(answers.begin(), answers.end());
        answers.erase(std::unique(answers.begin(), answers.end()), answers.end());
        groups.push_back({{known, rel, dir == 0 ? Direction::Tail : Direction::Head},
                          std::move(answers)});
    }
    return groups;
}

// Gradient buffers with the same shapes as the model.
struct KgeGrad {
    std::vector<double> entity_emb;
    std::vector<double> relation_emb;
    std::vector<double> core;

    explicit KgeGrad(const KgeModel& m)
        : entity_emb(m.entity_emb.size(), 0.0),
          relation_emb(m.relation_emb.size(), 0.0),
          core(m.core.size(), 0.0) {}
};

// Mean binary cross entropy over all entities for one group; accumulates
// parameter gradients into `grad` when non-null.
inline double kge_group_loss(const KgeModel& m, const QueryGroup& g, KgeGrad* grad = nullptr) {
    const int32_t d = m.d;
    const int64_t n = m.n_entities;
    std::vector<double> t1, ctx;
    detail::kge_context(m, g.q, t1, ctx);

    std::vector<char> label(n, 0);
    for (EntityId e : g.answers) label[e] = 1;

    double loss = 0.0;
    std::vector<double> gscore(grad ? n : 0);
    for (int64_t e = 0; e < n; ++e) {
        const double* ee = m.ent(e);
        double s = 0.0;
        for (int32_t c = 0; c < d; ++c) s += ctx[c] * ee[c];
        const double p = stable_sigmoid(s);
        const double y = label[e] ? 1.0 : 0.0;
        loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        if (grad) gscore[e] = (p - y) / static_cast<double>(n);
    }
    loss /= static_cast<double>(n);
    if (!std::isfinite(loss)) fail("kge: non-finite loss");
    if (!grad) return loss;

    // score_e = ctx . ent(e)
    std::vector<double> gctx(d, 0.0);
    for (int64_t e = 0; e < n; ++e) {
        const double ge = gscore[e];
        if (ge == 0.0) continue;
        const double* ee = m.ent(e);
        double* ge_out = grad->entity_emb.data() + e * d;
        for (int32_t c = 0; c < d; ++c) {
            gctx[c] += ge * ee[c];
            ge_out[c] += ge * ctx[c];
        }
    }

    const double* ek = m.ent(g.q.known);
    const double* er = m.rel(g.q.rel);
    double* gk = grad->entity_emb.data() + static_cast<int64_t>(g.q.known) * d;
    double* gr = grad->relation_emb.data() + static_cast<int64_t>(g.q.rel) * d;
    if (g.q.dir == Direction::Tail) {
        // ctx[c] = sum_ab core[a][b][c] ek[a] er[b]
        for (int32_t b = 0; b < d; ++b) {
            const double* row = t1.data() + static_cast<size_t>(b) * d;
            double s = 0.0;
            for (int32_t c = 0; c < d; ++c) s += row[c] * gctx[c];
            gr[b] += s;
        }
        for (int32_t a = 0; a < d; ++a) {
            const double* slab = m.core.data() + static_cast<size_t>(a) * d * d;
            double* gslab = grad->core.data() + static_cast<size_t>(a) * d * d;
            double sa = 0.0;
            for (int32_t b = 0; b < d; ++b) {
                const double rb = er[b];
                const double gouter = ek[a] * rb;
                for (int32_t c = 0; c < d; ++c) {
                    sa += slab[static_cast<size_t>(b) * d + c] * rb * gctx[c];
                    gslab[static_cast<size_t>(b) * d + c] += gouter * gctx[c];
                }
            }
            gk[a] += sa;
        }
    } else {
        // ctx[a] = sum_bc core[a][b][c] er[b] ek[c]
        for (int32_t a = 0; a < d; ++a) {
            const double ga = gctx[a];
            if (ga == 0.0) continue;
            const double* row = t1.data() + static_cast<size_t>(a) * d;
            for (int32_t b = 0; b < d; ++b) gr[b] += ga * row[b];
        }
        for (int32_t a = 0; a < d; ++a) {
            const double ga = gctx[a];
            const double* slab = m.core.data() + static_cast<size_t>(a) * d * d;
            double* gslab = grad->core.data() + static_cast<size_t>(a) * d * d;
            for (int32_t b = 0; b < d; ++b) {
                const double rb = er[b];
                const double w = ga * rb;
                const double* row = slab + static_cast<size_t>(b) * d;
                double* grow = gslab + static_cast<size_t>(b) * d;
                for (int32_t c = 0; c < d; ++c) {
                    gk[c] += w * row[c];
                    grow[c] += w * ek[c];
                }
            }
        }
    }
    return loss;
}

struct KgeTrainConfig {
    int32_t epochs = 50;
    double lr = 0.05;
    uint64_t seed = 1;
};

// Trains in place; returns the per-epoch mean group loss.
inline std::vector<double> kge_train(KgeModel& m, const std::vector<Triple>& train,
                                     const KgeTrainConfig& cfg) {
    auto groups = build_query_groups(train);
    require(!groups.empty(), "kge: empty training split");

    std::vector<double> acc_e(m.entity_emb.size(), 0.0);
    std::vector<double> acc_r(m.relation_emb.size(), 0.0);
    std::vector<double> acc_c(m.core.size(), 0.0);
    const double eps = 1e-8;

    std::vector<double> history;
    std::vector<int32_t> order(groups.size());
    std::iota(order.begin(), order.end(), 0);

    for (int32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(mix_seed(cfg.seed, 0x6570u + epoch));
        rng.shuffle(order);
        double epoch_loss = 0.0;
        KgeGrad grad(m);
        for (int32_t gi : order) {
            std::fill(grad.entity_emb.begin(), grad.entity_emb.end(), 0.0);
            std::fill(grad.relation_emb.begin(), grad.relation_emb.end(), 0.0);
            std::fill(grad.core.begin(), grad.core.end(), 0.0);
            epoch_loss += kge_group_loss(m, groups[gi], &grad);
            auto step = [&](std::vector<double>& p, std::vector<double>& acc,
                            const std::vector<double>& g) {
                for (size_t i = 0; i < p.size(); ++i) {
                    if (g[i] == 0.0) continue;
                    acc[i] += g[i] * g[i];
                    p[i] -= cfg.lr * g[i] / (std::sqrt(acc[i]) + eps);
                }
            };
            step(m.entity_emb, acc_e, grad.entity_emb);
            step(m.relation_emb, acc_r, grad.relation_emb);
            step(m.core, acc_c, grad.core);
        }
        history.push_back(epoch_loss / static_cast<double>(groups.size()));
        if (!std::isfinite(history.back())) fail("kge: training diverged");
    }
    return history;
}

inline void kge_save(const KgeModel& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    require(bool(os), "cannot write " + path);
    write_u32(os, kKgeMagic);
    write_u32(os, kKgeVersion);
    write_u64(os, static_cast<uint64_t>(m.n_entities));
    write_u64(os, static_cast<uint64_t>(m.n_relations));
    write_u64(os, static_cast<uint64_t>(m.d));
    write_f64_block(os, m.entity_emb);
    write_f64_block(os, m.relation_emb);
    write_f64_block(os, m.core);
    require(bool(os), "write failed: " + path);
}

inline KgeModel kge_load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(bool(is), "cannot read " + path);
    require(read_u32(is) == kKgeMagic, path + ": not a first-stage checkpoint");
    require(read_u32(is) == kKgeVersion, path + ": unsupported checkpoint version");
    KgeModel m;
    m.n_entities = static_cast<int64_t>(read_u64(is));
    m.n_relations = static_cast<int64_t>(read_u64(is));
    m.d = static_cast<int32_t>(read_u64(is));
    read_f64_block(is, m.entity_emb, static_cast<size_t>(m.n_entities) * m.d);
    read_f64_block(is, m.relation_emb, static_cast<size_t>(m.n_relations) * m.d);
    read_f64_block(is, m.core, static_cast<size_t>(m.d) * m.d * m.d);
    require(bool(is), "truncated checkpoint: " + path);
    return m;
}

}  // namespace kgrank
