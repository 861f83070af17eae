#pragma once
// Dataset store for curated and open KGs.
//
// On-disk layout (one directory per dataset):
//   entities.tsv / relations.tsv   idx<TAB>label          (UTF-8, dense 0-based)
//   train.tsv / valid.tsv / test.tsv   head<TAB>rel<TAB>tail  (ASCII decimal)
//   definitions.tsv   optional   entity_idx<TAB>definition text
//   clusters.tsv      optional   entity_idx<TAB>cluster_idx (total, dense)
//   rel_templates.tsv optional   rel_idx<TAB>pattern with [H] and [T]

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgrank/types.hpp"
#include "kgrank/util.hpp"

namespace kgrank {

enum class DatasetKind { Curated, Open };

inline uint64_t pair_key(int32_t a, int32_t b) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) |
           static_cast<uint32_t>(b);
}

struct KnowledgeGraph {
    DatasetKind kind = DatasetKind::Curated;
    std::vector<std::string> entity_labels;
    std::vector<std::string> relation_labels;
    std::vector<Triple> train;
    std::vector<Triple> valid;
    std::vector<Triple> test;

    // Optional auxiliary data; empty containers mean "not provided".
    std::vector<std::string> entity_definitions;   // per entity, "" = none
    std::vector<std::string> relation_templates;   // per relation, "" = none
    std::vector<int32_t> cluster_of;               // per entity when present
    int32_t cluster_count = 0;

    // Duplicate counts per split, recorded at load time.
    int64_t duplicates_train = 0;
    int64_t duplicates_valid = 0;
    int64_t duplicates_test = 0;

    int32_t entity_count() const { return static_cast<int32_t>(entity_labels.size()); }
    int32_t relation_count() const { return static_cast<int32_t>(relation_labels.size()); }
    bool has_definitions() const { return !entity_definitions.empty(); }
    bool has_clusters() const { return !cluster_of.empty(); }

    const std::vector<Triple>& split(int i) const {
        return i == 0 ? train : (i == 1 ? valid : test);
    }
};

// Known-true answers per (entity, rel) over the union of all splits, used for
// the filtered evaluation setting.
struct FilterIndex {
    std::unordered_map<uint64_t, std::unordered_set<EntityId>> tails_of;  // (head, rel)
    std::unordered_map<uint64_t, std::unordered_set<EntityId>> heads_of;  // (tail, rel)

    const std::unordered_set<EntityId>* answers(const Query& q) const {
        const auto& m = (q.dir == Direction::Tail) ? tails_of : heads_of;
        auto it = m.find(pair_key(q.known, q.rel));
        return it == m.end() ? nullptr : &it->second;
    }
};

namespace detail {

inline std::string loc(const std::string& file, int64_t line) {
    return file + ":" + std::to_string(line);
}

// Splits a line at the first `n - 1` tabs; the last field keeps any remaining
// tabs (labels may contain them in principle, indices may not).
inline std::vector<std::string> split_tabs(const std::string& line, size_t n) {
    std::vector<std::string> out;
    size_t start = 0;
    while (out.size() + 1 < n) {
        size_t tab = line.find('\t', start);
        if (tab == std::string::npos) break;
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    out.push_back(line.substr(start));
    return out;
}

inline int64_t parse_index(const std::string& s, const std::string& file, int64_t line) {
    if (s.empty()) fail(loc(file, line) + ": empty index field");
    int64_t v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') fail(loc(file, line) + ": malformed index '" + s + "'");
        v = v * 10 + (c - '0');
        if (v > INT32_MAX) fail(loc(file, line) + ": index out of range '" + s + "'");
    }
    return v;
}

inline bool read_line(std::ifstream& is, std::string& line) {
    if (!std::getline(is, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

// idx<TAB>text files where idx must equal the 0-based line number.
inline std::vector<std::string> load_labels(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("missing file: " + path);
    std::vector<std::string> labels;
    std::string line;
    int64_t lineno = 0;
    while (read_line(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split_tabs(line, 2);
        if (fields.size() != 2) fail(loc(path, lineno) + ": expected idx<TAB>label");
        int64_t idx = parse_index(fields[0], path, lineno);
        if (idx != static_cast<int64_t>(labels.size()))
            fail(loc(path, lineno) + ": indices must be dense and in file order (got " +
                 std::to_string(idx) + ", expected " + std::to_string(labels.size()) + ")");
        if (fields[1].empty()) fail(loc(path, lineno) + ": empty label");
        labels.push_back(fields[1]);
    }
    return labels;
}

inline std::vector<Triple> load_triples(const std::string& path, int32_t n_entities,
                                        int32_t n_relations) {
    std::ifstream is(path);
    if (!is) fail("missing file: " + path);
    std::vector<Triple> triples;
    std::string line;
    int64_t lineno = 0;
    while (read_line(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split_tabs(line, 3);
        if (fields.size() != 3 || fields[2].find('\t') != std::string::npos)
            fail(loc(path, lineno) + ": expected head<TAB>rel<TAB>tail");
        int64_t h = parse_index(fields[0], path, lineno);
        int64_t r = parse_index(fields[1], path, lineno);
        int64_t t = parse_index(fields[2], path, lineno);
        if (h >= n_entities || t >= n_entities)
            fail(loc(path, lineno) + ": entity index out of range");
        if (r >= n_relations) fail(loc(path, lineno) + ": relation index out of range");
        triples.push_back({static_cast<EntityId>(h), static_cast<RelationId>(r),
                           static_cast<EntityId>(t)});
    }
    return triples;
}

inline int64_t count_duplicates(const std::vector<Triple>& triples) {
    std::set<Triple> seen;
    int64_t dup = 0;
    for (const auto& t : triples)
        if (!seen.insert(t).second) ++dup;
    return dup;
}

}  // namespace detail

inline KnowledgeGraph load_dataset(const std::string& dir, DatasetKind kind) {
    namespace fs = std::filesystem;
    KnowledgeGraph kg;
    kg.kind = kind;
    kg.entity_labels = detail::load_labels(dir + "/entities.tsv");
    kg.relation_labels = detail::load_labels(dir + "/relations.tsv");
    kg.train = detail::load_triples(dir + "/train.tsv", kg.entity_count(), kg.relation_count());
    kg.valid = detail::load_triples(dir + "/valid.tsv", kg.entity_count(), kg.relation_count());
    kg.test = detail::load_triples(dir + "/test.tsv", kg.entity_count(), kg.relation_count());

    kg.duplicates_train = detail::count_duplicates(kg.train);
    kg.duplicates_valid = detail::count_duplicates(kg.valid);
    kg.duplicates_test = detail::count_duplicates(kg.test);
    // Duplicates are kept: dropping them would silently change split counts.
    if (kg.duplicates_train > 0)
        std::cerr << "kg-store: warning: train split has " << kg.duplicates_train
                  << " duplicate triples (kept)\n";
    if (kg.duplicates_valid > 0)
        std::cerr << "kg-store: warning: valid split has " << kg.duplicates_valid
                  << " duplicate triples (kept)\n";
    if (kg.duplicates_test > 0)
        std::cerr << "kg-store: warning: test split has " << kg.duplicates_test
                  << " duplicate triples (kept)\n";

    // Splits must be disjoint as (h, r, t) sets.
    {
        std::set<Triple> train_set(kg.train.begin(), kg.train.end());
        std::set<Triple> valid_set(kg.valid.begin(), kg.valid.end());
        for (const auto& t : kg.valid)
            if (train_set.count(t))
                fail(dir + ": triple (" + std::to_string(t.head) + "," + std::to_string(t.rel) +
                     "," + std::to_string(t.tail) + ") appears in both train and valid");
        for (const auto& t : kg.test) {
            if (train_set.count(t))
                fail(dir + ": triple (" + std::to_string(t.head) + "," + std::to_string(t.rel) +
                     "," + std::to_string(t.tail) + ") appears in both train and test");
            if (valid_set.count(t))
                fail(dir + ": triple (" + std::to_string(t.head) + "," + std::to_string(t.rel) +
                     "," + std::to_string(t.tail) + ") appears in both valid and test");
        }
    }

    const std::string def_path = dir + "/definitions.tsv";
    if (fs::exists(def_path)) {
        kg.entity_definitions.assign(kg.entity_count(), "");
        std::ifstream is(def_path);
        std::string line;
        int64_t lineno = 0;
        while (detail::read_line(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto fields = detail::split_tabs(line, 2);
            if (fields.size() != 2)
                fail(detail::loc(def_path, lineno) + ": expected entity_idx<TAB>definition");
            int64_t idx = detail::parse_index(fields[0], def_path, lineno);
            if (idx >= kg.entity_count())
                fail(detail::loc(def_path, lineno) + ": entity index out of range");
            kg.entity_definitions[idx] = fields[1];
        }
    }

    const std::string tpl_path = dir + "/rel_templates.tsv";
    if (fs::exists(tpl_path)) {
        kg.relation_templates.assign(kg.relation_count(), "");
        std::ifstream is(tpl_path);
        std::string line;
        int64_t lineno = 0;
        while (detail::read_line(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto fields = detail::split_tabs(line, 2);
            if (fields.size() != 2)
                fail(detail::loc(tpl_path, lineno) + ": expected rel_idx<TAB>pattern");
            int64_t idx = detail::parse_index(fields[0], tpl_path, lineno);
            if (idx >= kg.relation_count())
                fail(detail::loc(tpl_path, lineno) + ": relation index out of range");
            kg.relation_templates[idx] = fields[1];
        }
    }

    const std::string cluster_path = dir + "/clusters.tsv";
    if (fs::exists(cluster_path)) {
        kg.cluster_of.assign(kg.entity_count(), -1);
        std::ifstream is(cluster_path);
        std::string line;
        int64_t lineno = 0;
        int32_t max_cluster = -1;
        std::unordered_set<int32_t> seen_clusters;
        while (detail::read_line(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto fields = detail::split_tabs(line, 2);
            if (fields.size() != 2)
                fail(detail::loc(cluster_path, lineno) + ": expected entity_idx<TAB>cluster_idx");
            int64_t e = detail::parse_index(fields[0], cluster_path, lineno);
            int64_t c = detail::parse_index(fields[1], cluster_path, lineno);
            if (e >= kg.entity_count())
                fail(detail::loc(cluster_path, lineno) + ": entity index out of range");
            kg.cluster_of[e] = static_cast<int32_t>(c);
            max_cluster = std::max(max_cluster, static_cast<int32_t>(c));
            seen_clusters.insert(static_cast<int32_t>(c));
        }
        for (int32_t e = 0; e < kg.entity_count(); ++e)
            if (kg.cluster_of[e] < 0)
                fail(cluster_path + ": cluster map must cover every entity (missing " +
                     std::to_string(e) + ")");
        if (static_cast<int32_t>(seen_clusters.size()) != max_cluster + 1)
            fail(cluster_path + ": cluster indices must be dense 0.." +
                 std::to_string(max_cluster));
        kg.cluster_count = max_cluster + 1;
    }

    return kg;
}

// Writes the dataset back in the same format; load(save(kg)) is identity on
// counts, labels, and triples.
inline void save_dataset(const KnowledgeGraph& kg, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto write_labels = [&](const std::string& name, const std::vector<std::string>& labels) {
        std::ofstream os(dir + "/" + name);
        require(bool(os), "cannot write " + dir + "/" + name);
        for (size_t i = 0; i < labels.size(); ++i) os << i << '\t' << labels[i] << '\n';
    };
    auto write_triples = [&](const std::string& name, const std::vector<Triple>& triples) {
        std::ofstream os(dir + "/" + name);
        require(bool(os), "cannot write " + dir + "/" + name);
        for (const auto& t : triples) os << t.head << '\t' << t.rel << '\t' << t.tail << '\n';
    };
    write_labels("entities.tsv", kg.entity_labels);
    write_labels("relations.tsv", kg.relation_labels);
    write_triples("train.tsv", kg.train);
    write_triples("valid.tsv", kg.valid);
    write_triples("test.tsv", kg.test);
    if (kg.has_definitions()) {
        std::ofstream os(dir + "/definitions.tsv");
        for (size_t i = 0; i < kg.entity_definitions.size(); ++i)
            if (!kg.entity_definitions[i].empty())
                os << i << '\t' << kg.entity_definitions[i] << '\n';
    }
    if (!kg.relation_templates.empty()) {
        std::ofstream os(dir + "/rel_templates.tsv");
        for (size_t i = 0; i < kg.relation_templates.size(); ++i)
            if (!kg.relation_templates[i].empty())
                os << i << '\t' << kg.relation_templates[i] << '\n';
    }
    if (kg.has_clusters()) {
        std::ofstream os(dir + "/clusters.tsv");
        for (size_t i = 0; i < kg.cluster_of.size(); ++i) os << i << '\t' << kg.cluster_of[i] << '\n';
    }
}

inline FilterIndex build_filter_index(const KnowledgeGraph& kg) {
    FilterIndex index;
    for (int s = 0; s < 3; ++s) {
        for (const auto& t : kg.split(s)) {
            index.tails_of[pair_key(t.head, t.rel)].insert(t.tail);
            index.heads_of[pair_key(t.tail, t.rel)].insert(t.head);
        }
    }
    return index;
}

}  // namespace kgrank
