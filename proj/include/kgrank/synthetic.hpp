#pragma once

// Seeded toy knowledge graph with planted compositional structure, used by the
// `synth` subcommand and the end-to-end tests.  Entities belong to groups and
// each relation links one head group to one tail group; both group memberships
// are spelled out in the labels, so the regularity is recoverable from text
// alone.  With tag matching enabled, group members additionally split into
// two-entity cells that share a tag token from a small global vocabulary, and
// every relation resolves to the tail-group entities carrying the head's tag;
// that plants a finer regularity that is likewise visible in the labels.  A
// noise fraction rewires some tails to random entities.

#include <string>
#include <unordered_set>
#include <vector>

#include "kgrank/kg.hpp"
#include "kgrank/util.hpp"

namespace kgrank {

struct SyntheticConfig {
    int32_t entities = 200;
    int32_t relations = 20;
    int32_t groups = 10;
    int32_t tails_per_head = 3;
    double noise_frac = 0.1;
    uint64_t seed = 7;
    // When set, consecutive group members pair up into tag cells and every
    // relation links a head to the tail-group entities whose tag equals the
    // head's.  The tag vocabulary is shared across groups, so the equality
    // rule is recoverable from text.  Requires even group sizes;
    // tails_per_head is ignored because the cell determines the tails.
    bool tag_match = false;
    // How many label tokens spell out the group (1..3); more tokens widen the
    // textual margin of the group regularity.
    int32_t group_tokens = 1;
};

inline KnowledgeGraph make_synthetic_kg(const SyntheticConfig& cfg = {}) {
    require(cfg.groups >= 1, "synthetic KG needs at least one group");
    require(cfg.entities >= 2 * cfg.groups, "synthetic KG needs >= 2 entities per group");
    require(cfg.relations >= 1, "synthetic KG needs at least one relation");
    require(cfg.tails_per_head >= 1, "synthetic KG needs tails_per_head >= 1");
    require(cfg.noise_frac >= 0.0 && cfg.noise_frac <= 1.0, "noise_frac must lie in [0,1]");
    require(cfg.group_tokens >= 1 && cfg.group_tokens <= 3, "group_tokens must lie in 1..3");

    KnowledgeGraph kg;
    kg.kind = DatasetKind::Curated;

    const int32_t g = cfg.groups;
    std::vector<std::vector<EntityId>> members(g);
    for (int32_t i = 0; i < cfg.entities; ++i) members[i % g].push_back(i);

    // Tag cells: consecutive group members share a tag, two members per cell.
    std::vector<int32_t> tag(cfg.entities, 0);
    if (cfg.tag_match) {
        for (int32_t c = 0; c < g; ++c) {
            const auto& m = members[c];
            require(m.size() % 2 == 0, "tag matching needs even group sizes");
            for (size_t n = 0; n < m.size(); ++n)
                tag[m[n]] = static_cast<int32_t>(n / 2);
        }
    }

    static const char* kGroupWords[3] = {"grp", "kin", "sect"};
    auto group_mark = [&](int32_t c) {
        std::string s;
        for (int32_t w = 0; w < cfg.group_tokens; ++w) {
            if (w) s += " ";
            s += kGroupWords[w] + std::to_string(c);
        }
        return s;
    };

    kg.entity_labels.reserve(cfg.entities);
    for (int32_t i = 0; i < cfg.entities; ++i) {
        std::string label = "ent" + std::to_string(i) + " " + group_mark(i % g);
        if (cfg.tag_match) label += " tag" + std::to_string(tag[i]);
        kg.entity_labels.push_back(label);
    }

    std::vector<int32_t> head_group(cfg.relations), tail_group(cfg.relations);
    for (int32_t j = 0; j < cfg.relations; ++j) {
        head_group[j] = j % g;
        tail_group[j] = static_cast<int32_t>((3 * j + 1) % g);
        kg.relation_labels.push_back("rel" + std::to_string(j) + " links " +
                                     group_mark(head_group[j]) + " to " +
                                     group_mark(tail_group[j]));
    }

    Rng rng(mix_seed(cfg.seed, 0x73796e74u));
    std::vector<Triple> triples;
    for (int32_t j = 0; j < cfg.relations; ++j) {
        for (EntityId h : members[head_group[j]]) {
            std::vector<EntityId> pool;
            for (EntityId t : members[tail_group[j]]) {
                if (t == h) continue;
                if (cfg.tag_match && tag[t] != tag[h]) continue;
                pool.push_back(t);
            }
            rng.shuffle(pool);
            size_t take = cfg.tag_match
                              ? pool.size()
                              : std::min<size_t>(pool.size(), static_cast<size_t>(cfg.tails_per_head));
            std::unordered_set<EntityId> used;
            for (size_t n = 0; n < take; ++n) {
                EntityId t = pool[n];
                if (rng.uniform() < cfg.noise_frac) {
                    for (int tries = 0; tries < 64; ++tries) {
                        EntityId cand = static_cast<EntityId>(rng.below(static_cast<uint64_t>(cfg.entities)));
                        if (cand != h && !used.count(cand)) {
                            t = cand;
                            break;
                        }
                    }
                }
                if (used.insert(t).second) triples.push_back({h, j, t});
            }
        }
    }

    rng.shuffle(triples);
    size_t n = triples.size();
    size_t n_test = n / 10;
    size_t n_valid = n / 10;
    kg.test.assign(triples.begin(), triples.begin() + n_test);
    kg.valid.assign(triples.begin() + n_test, triples.begin() + n_test + n_valid);
    kg.train.assign(triples.begin() + n_test + n_valid, triples.end());
    return kg;
}

inline void write_synthetic_dataset(const std::string& dir, const SyntheticConfig& cfg = {}) {
    save_dataset(make_synthetic_kg(cfg), dir);
}

}  // namespace kgrank
