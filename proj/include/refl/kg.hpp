#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace refl {

struct Triple {
  std::uint32_t head = 0;
  std::uint32_t relation = 0;
  std::uint32_t tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// One knowledge graph with dense 0-based entity/relation ids. Original URIs
// are kept only as side tables for export.
struct TripleStore {
  std::size_t entity_count = 0;
  std::size_t relation_count = 0;
  std::vector<Triple> triples;  // deduplicated, sorted by (head, relation, tail)
  std::vector<std::string> entity_uris;
  std::vector<std::string> relation_uris;

  bool operator==(const TripleStore&) const = default;
};

struct AlignedPair {
  std::uint32_t left = 0;   // entity id in g1
  std::uint32_t right = 0;  // entity id in g2

  friend auto operator<=>(const AlignedPair&, const AlignedPair&) = default;
};

struct KnowledgeGraphPair {
  TripleStore g1;
  TripleStore g2;
  std::vector<AlignedPair> alignment;  // sorted by (left, right)

  bool operator==(const KnowledgeGraphPair&) const = default;
};

// Loads the tab-separated on-disk layout: ent_ids_1, ent_ids_2, triples_1,
// triples_2, ref_ent_ids, and optionally rel_ids_1 / rel_ids_2. Ids are
// re-mapped to dense 0-based ranges per store. Throws std::runtime_error on
// missing files, malformed lines, ids not declared in ent_ids, or duplicate
// alignment entries.
KnowledgeGraphPair load_kg_pair(const std::filesystem::path& dir);

// Writes the same layout back; load_kg_pair(save_kg_pair(p)) == p.
void save_kg_pair(const KnowledgeGraphPair& pair, const std::filesystem::path& dir);

// Enforces the structural invariants (dense ids, deduplication, alignment
// uniqueness). Throws std::runtime_error when violated.
void validate(const KnowledgeGraphPair& pair);

struct SeedSplit {
  std::vector<AlignedPair> train;
  std::vector<AlignedPair> test;
  std::uint64_t rng_seed = 0;
};

// Shuffles the alignment deterministically and takes the first
// floor(train_ratio * |alignment|) pairs as train.
SeedSplit split_seeds(const KnowledgeGraphPair& pair, double train_ratio, std::uint64_t rng_seed);

// Disjoint-union graph over both stores. g2 entity ids are offset by |E1|,
// g2 relation ids by |R1|. Each original triple (h, r, t) contributes the
// edge (t, r) to h's list and (h, inverse(r)) to t's list; every entity also
// carries exactly one self-loop edge. Edge lists are CSR, sorted by
// (neighbor, relation).
struct NeighborIndex {
  std::size_t unified_entity_count = 0;
  std::size_t unified_relation_count = 0;  // 2 * (|R1| + |R2|) + 1
  std::size_t g1_entity_count = 0;
  std::size_t g1_relation_count = 0;
  std::size_t original_relation_count = 0;  // |R1| + |R2|

  std::vector<std::size_t> edge_offsets;     // unified_entity_count + 1
  std::vector<std::uint32_t> edge_neighbor;  // per edge
  std::vector<std::uint32_t> edge_relation;  // per edge, unified relation id

  std::size_t edge_count() const { return edge_neighbor.size(); }
  std::uint32_t self_loop_relation() const { return (std::uint32_t)(unified_relation_count - 1); }
  std::uint32_t inverse_relation(std::uint32_t r) const {
    return r < original_relation_count ? (std::uint32_t)(r + original_relation_count)
                                       : (std::uint32_t)(r - original_relation_count);
  }
  std::uint32_t unified_g2_entity(std::uint32_t e) const {
    return (std::uint32_t)(g1_entity_count + e);
  }
};

NeighborIndex build_union_index(const KnowledgeGraphPair& pair);

}  // namespace refl
