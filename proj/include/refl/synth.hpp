#pragma once

#include <cstdint>
#include <vector>

#include "refl/kg.hpp"

namespace refl {

// Synthetic graphs with a known ground-truth bijection, for tests and
// benchmarks where recovery can be judged exactly.

struct SynthOptions {
  std::size_t entities = 100;
  std::size_t relations = 10;
  std::size_t triples = 250;  // mean total degree = 2 * triples / entities
  // > 0 skews head/tail picks toward low ids, giving hub-like degree skew
  double hub_bias = 0.0;
  // every entity heads at least this many triples; kills structurally
  // indistinguishable twins (degree-0/1 leaves) that no structure-only
  // aligner can tell apart
  std::size_t min_out_degree = 0;
  // > 0 partitions entities into this many type groups and assigns every
  // relation a fixed (source type, target type), the way real KG relations
  // connect typed entities
  std::size_t entity_types = 0;
  std::uint64_t rng_seed = 7;
};

// Random triple store; triples are distinct, no (h, r, h) self-loops.
TripleStore make_random_kg(const SynthOptions& opts);

struct CrossedKgOptions {
  std::size_t entities = 1000;
  std::size_t hubs = 50;           // shared target entities (cities, films, ...)
  std::size_t role_relations = 20; // relations whose pairing carries identity
  std::size_t families = 220;      // sibling pairs distinguished only by role-target crossing
  std::size_t filler_triples = 1200;
  std::uint64_t rng_seed = 7;
};

// KG dominated by crossed role pairs: each family holds two entities with the
// same neighbor set {a, b} and the same relation set {r, s}, wired (r->a, s->b)
// for one and (r->b, s->a) for the other. Telling siblings apart requires
// relation-conditional aggregation, the pattern real KGs show with
// born-in/died-in style relations.
TripleStore make_crossed_kg(const CrossedKgOptions& opts);

// g2 = g1 relabeled by a random entity/relation permutation, each side
// independently keeping `keep_fraction` of the base triples. The alignment
// holds the full ground-truth bijection.
KnowledgeGraphPair make_aligned_pair(const TripleStore& base, double keep_fraction,
                                     std::uint64_t rng_seed);

}  // namespace refl
