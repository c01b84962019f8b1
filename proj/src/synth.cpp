#include "refl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "refl/rng.hpp"

namespace refl {

namespace {

std::uint32_t biased_pick(Rng& rng, std::size_t n, double hub_bias) {
  if (hub_bias <= 0.0) return (std::uint32_t)rng.below(n);
  // power-law-ish skew toward low ids
  const double u = rng.uniform_open();
  const double x = std::pow(u, 1.0 + hub_bias);
  auto id = (std::uint32_t)(x * (double)n);
  return id >= n ? (std::uint32_t)(n - 1) : id;
}

}  // namespace

TripleStore make_random_kg(const SynthOptions& opts) {
  if (opts.entities < 2 || opts.relations < 1)
    throw std::invalid_argument("make_random_kg: need >= 2 entities and >= 1 relation");
  TripleStore store;
  store.entity_count = opts.entities;
  store.relation_count = opts.relations;
  for (std::size_t i = 0; i < opts.entities; ++i)
    store.entity_uris.push_back("e" + std::to_string(i));
  for (std::size_t r = 0; r < opts.relations; ++r)
    store.relation_uris.push_back("r" + std::to_string(r));

  Rng rng(mix_key(opts.rng_seed, {0x5eed}));

  // optional typing: entities get a type, relations a (src, dst) type pair,
  // and each triple respects its relation's signature
  const std::size_t ntypes = opts.entity_types;
  std::vector<std::uint32_t> entity_type(opts.entities, 0);
  std::vector<std::vector<std::uint32_t>> by_type(std::max<std::size_t>(ntypes, 1));
  std::vector<std::pair<std::uint32_t, std::uint32_t>> rel_sig(opts.relations, {0, 0});
  if (ntypes > 0) {
    for (std::uint32_t e = 0; e < opts.entities; ++e) {
      entity_type[e] = (std::uint32_t)rng.below(ntypes);
      by_type[entity_type[e]].push_back(e);
    }
    for (auto& grp : by_type)
      if (grp.empty()) grp.push_back((std::uint32_t)rng.below(opts.entities));
    for (auto& sig : rel_sig)
      sig = {(std::uint32_t)rng.below(ntypes), (std::uint32_t)rng.below(ntypes)};
  }

  auto pick_for = [&](std::uint32_t rel, bool head) -> std::uint32_t {
    if (ntypes == 0) return biased_pick(rng, opts.entities, opts.hub_bias);
    const auto& grp = by_type[head ? rel_sig[rel].first : rel_sig[rel].second];
    return grp[biased_pick(rng, grp.size(), head ? 0.0 : opts.hub_bias)];
  };

  std::set<Triple> seen;
  for (std::uint32_t h = 0; opts.min_out_degree > 0 && h < opts.entities; ++h) {
    std::size_t placed = 0, tries = 0;
    while (placed < opts.min_out_degree && tries++ < 200) {
      Triple t;
      t.head = h;
      t.relation = (std::uint32_t)rng.below(opts.relations);
      if (ntypes > 0 && rel_sig[t.relation].first != entity_type[h]) continue;
      t.tail = pick_for(t.relation, false);
      if (t.head == t.tail) continue;
      if (seen.insert(t).second) ++placed;
    }
  }
  std::size_t attempts = 0;
  while (seen.size() < opts.triples && attempts < opts.triples * 50) {
    ++attempts;
    Triple t;
    t.relation = (std::uint32_t)rng.below(opts.relations);
    t.head = pick_for(t.relation, true);
    t.tail = pick_for(t.relation, false);
    if (t.head == t.tail) continue;
    seen.insert(t);
  }
  store.triples.assign(seen.begin(), seen.end());
  return store;
}

TripleStore make_crossed_kg(const CrossedKgOptions& opts) {
  if (opts.entities < opts.hubs + 2 * opts.families)
    throw std::invalid_argument("make_crossed_kg: not enough entities for hubs and families");
  if (opts.hubs < 2 || opts.role_relations < 2)
    throw std::invalid_argument("make_crossed_kg: need >= 2 hubs and >= 2 role relations");

  TripleStore store;
  store.entity_count = opts.entities;
  store.relation_count = opts.role_relations + 1;  // roles plus one filler relation
  for (std::size_t i = 0; i < opts.entities; ++i)
    store.entity_uris.push_back("e" + std::to_string(i));
  for (std::size_t r = 0; r < store.relation_count; ++r)
    store.relation_uris.push_back("r" + std::to_string(r));

  Rng rng(mix_key(opts.rng_seed, {0xc1055}));
  std::set<Triple> seen;
  const auto hub = [&](std::uint64_t h) { return (std::uint32_t)h; };  // hubs take ids [0, hubs)

  // sibling pairs occupy ids [hubs, hubs + 2*families)
  for (std::size_t f = 0; f < opts.families; ++f) {
    const auto e1 = (std::uint32_t)(opts.hubs + 2 * f);
    const auto e2 = (std::uint32_t)(opts.hubs + 2 * f + 1);
    const auto a = hub(rng.below(opts.hubs));
    std::uint32_t b = hub(rng.below(opts.hubs));
    while (b == a) b = hub(rng.below(opts.hubs));
    const auto r = (std::uint32_t)rng.below(opts.role_relations);
    std::uint32_t s = (std::uint32_t)rng.below(opts.role_relations);
    while (s == r) s = (std::uint32_t)rng.below(opts.role_relations);
    seen.insert({e1, r, a});
    seen.insert({e1, s, b});
    seen.insert({e2, r, b});
    seen.insert({e2, s, a});
  }

  // filler edges connect everything into one graph with degree variety
  const auto filler_rel = (std::uint32_t)opts.role_relations;
  std::size_t attempts = 0;
  while (seen.size() < 4 * opts.families + opts.filler_triples &&
         attempts < opts.filler_triples * 50) {
    ++attempts;
    Triple t;
    t.head = (std::uint32_t)rng.below(opts.entities);
    t.tail = hub(rng.below(opts.hubs));
    t.relation = filler_rel;
    if (t.head == t.tail) continue;
    seen.insert(t);
  }
  store.triples.assign(seen.begin(), seen.end());
  return store;
}

KnowledgeGraphPair make_aligned_pair(const TripleStore& base, double keep_fraction,
                                     std::uint64_t rng_seed) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw std::invalid_argument("make_aligned_pair: keep_fraction must be in (0, 1]");
  Rng rng(mix_key(rng_seed, {0xa11c}));

  std::vector<std::uint32_t> ent_perm(base.entity_count), rel_perm(base.relation_count);
  for (std::size_t i = 0; i < ent_perm.size(); ++i) ent_perm[i] = (std::uint32_t)i;
  for (std::size_t i = 0; i < rel_perm.size(); ++i) rel_perm[i] = (std::uint32_t)i;
  rng.shuffle(ent_perm);
  rng.shuffle(rel_perm);

  KnowledgeGraphPair pair;
  pair.g1 = base;
  pair.g2.entity_count = base.entity_count;
  pair.g2.relation_count = base.relation_count;
  pair.g2.entity_uris.resize(base.entity_count);
  pair.g2.relation_uris.resize(base.relation_count);
  for (std::size_t i = 0; i < base.entity_count; ++i)
    pair.g2.entity_uris[ent_perm[i]] = "mirror/" + base.entity_uris[i];
  for (std::size_t r = 0; r < base.relation_count; ++r)
    pair.g2.relation_uris[rel_perm[r]] = "mirror/" + base.relation_uris[r];

  if (keep_fraction < 1.0) {
    std::vector<Triple> kept;
    for (const auto& t : base.triples)
      if (rng.uniform() < keep_fraction) kept.push_back(t);
    if (kept.size() < 2) kept = base.triples;
    pair.g1.triples = std::move(kept);
  }
  for (const auto& t : base.triples) {
    if (keep_fraction < 1.0 && rng.uniform() >= keep_fraction) continue;
    pair.g2.triples.push_back({ent_perm[t.head], rel_perm[t.relation], ent_perm[t.tail]});
  }
  std::sort(pair.g1.triples.begin(), pair.g1.triples.end());
  std::sort(pair.g2.triples.begin(), pair.g2.triples.end());

  pair.alignment.reserve(base.entity_count);
  for (std::size_t i = 0; i < base.entity_count; ++i)
    pair.alignment.push_back({(std::uint32_t)i, ent_perm[i]});
  std::sort(pair.alignment.begin(), pair.alignment.end());
  return pair;
}

}  // namespace refl
