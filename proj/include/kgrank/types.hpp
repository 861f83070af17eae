#pragma once

#include <cstdint>
#include <tuple>

namespace kgrank {

using EntityId = int32_t;
using RelationId = int32_t;

struct Triple {
    EntityId head;
    RelationId rel;
    EntityId tail;

    friend bool operator==(const Triple& a, const Triple& b) {
        return a.head == b.head && a.rel == b.rel && a.tail == b.tail;
    }
    friend bool operator<(const Triple& a, const Triple& b) {
        return std::tie(a.head, a.rel, a.tail) < std::tie(b.head, b.rel, b.tail);
    }
};

// A link-prediction query: (known, rel, ?) when dir == Tail, (?, rel, known)
// when dir == Head.
enum class Direction { Tail, Head };

struct Query {
    EntityId known;
    RelationId rel;
    Direction dir;

    friend bool operator==(const Query& a, const Query& b) {
        return a.known == b.known && a.rel == b.rel && a.dir == b.dir;
    }
};

// Component switches. qci/cci apply at training time, qp/cp/cg/dp at
// inference; gold_first alters training-target construction and is off by
// default.
struct Toggles {
    bool qci = true;
    bool cci = true;
    bool qp = false;
    bool cp = false;
    bool cg = true;
    bool dp = false;
    bool gold_first = false;

    bool any_rerank() const { return qci || cci || qp || cp || cg || dp; }
};

}  // namespace kgrank
