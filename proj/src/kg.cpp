#include "refl/kg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "refl/rng.hpp"

namespace refl {

namespace {

struct RawLine {
  std::vector<std::string> fields;
  std::size_t line_no = 0;
};

std::vector<RawLine> read_tsv(const std::filesystem::path& file, std::size_t expected_fields) {
  std::ifstream in(file, std::ios::binary);
  if (!in.is_open()) throw std::runtime_error("missing file: " + file.string());
  std::vector<RawLine> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    RawLine raw;
    raw.line_no = line_no;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        raw.fields.push_back(line.substr(start));
        break;
      }
      raw.fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (raw.fields.size() != expected_fields)
      throw std::runtime_error("malformed line: " + file.filename().string() + ":" +
                               std::to_string(line_no) + " expected " +
                               std::to_string(expected_fields) + " fields, got " +
                               std::to_string(raw.fields.size()));
    lines.push_back(std::move(raw));
  }
  return lines;
}

std::int64_t parse_id(const std::string& s, const std::filesystem::path& file, std::size_t line_no) {
  std::int64_t v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || v < 0)
    throw std::runtime_error("malformed line: " + file.filename().string() + ":" +
                             std::to_string(line_no) + " non-integer id '" + s + "'");
  return v;
}

struct IdTable {
  std::unordered_map<std::int64_t, std::uint32_t> dense;  // original id -> dense id
  std::vector<std::string> uris;                          // by dense id
};

IdTable load_id_table(const std::filesystem::path& file) {
  const auto lines = read_tsv(file, 2);
  std::vector<std::pair<std::int64_t, std::string>> entries;
  entries.reserve(lines.size());
  for (const auto& raw : lines)
    entries.emplace_back(parse_id(raw.fields[0], file, raw.line_no), raw.fields[1]);
  std::sort(entries.begin(), entries.end());
  IdTable table;
  table.uris.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i > 0 && entries[i].first == entries[i - 1].first)
      throw std::runtime_error("malformed line: " + file.filename().string() + " duplicate id " +
                               std::to_string(entries[i].first));
    table.dense.emplace(entries[i].first, (std::uint32_t)i);
    table.uris.push_back(std::move(entries[i].second));
  }
  return table;
}

struct RawTriple {
  std::int64_t head, relation, tail;
};

std::vector<RawTriple> load_raw_triples(const std::filesystem::path& file) {
  const auto lines = read_tsv(file, 3);
  std::vector<RawTriple> out;
  out.reserve(lines.size());
  for (const auto& raw : lines)
    out.push_back({parse_id(raw.fields[0], file, raw.line_no),
                   parse_id(raw.fields[1], file, raw.line_no),
                   parse_id(raw.fields[2], file, raw.line_no)});
  return out;
}

TripleStore build_store(const std::filesystem::path& dir, int side) {
  const std::string suffix = side == 1 ? "_1" : "_2";
  IdTable ents = load_id_table(dir / ("ent_ids" + suffix));
  const auto raw = load_raw_triples(dir / ("triples" + suffix));

  IdTable rels;
  const auto rel_file = dir / ("rel_ids" + suffix);
  if (std::filesystem::exists(rel_file)) {
    rels = load_id_table(rel_file);
  } else {
    // No rel_ids file: densify relation ids straight from the triples.
    std::vector<std::int64_t> ids;
    for (const auto& t : raw) ids.push_back(t.relation);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      rels.dense.emplace(ids[i], (std::uint32_t)i);
      rels.uris.push_back("r" + std::to_string(ids[i]));
    }
  }

  TripleStore store;
  store.entity_count = ents.uris.size();
  store.relation_count = rels.uris.size();
  store.entity_uris = std::move(ents.uris);
  store.relation_uris = std::move(rels.uris);
  store.triples.reserve(raw.size());
  const std::string name = "triples" + suffix;
  for (const auto& t : raw) {
    const auto h = ents.dense.find(t.head);
    const auto r = rels.dense.find(t.relation);
    const auto tl = ents.dense.find(t.tail);
    if (h == ents.dense.end() || tl == ents.dense.end())
      throw std::runtime_error(name + ": entity id " +
                               std::to_string(h == ents.dense.end() ? t.head : t.tail) +
                               " absent from ent_ids" + suffix);
    if (r == rels.dense.end())
      throw std::runtime_error(name + ": relation id " + std::to_string(t.relation) +
                               " absent from rel_ids" + suffix);
    store.triples.push_back({h->second, r->second, tl->second});
  }
  std::sort(store.triples.begin(), store.triples.end());
  store.triples.erase(std::unique(store.triples.begin(), store.triples.end()),
                      store.triples.end());
  return store;
}

}  // namespace

KnowledgeGraphPair load_kg_pair(const std::filesystem::path& dir) {
  KnowledgeGraphPair pair;
  pair.g1 = build_store(dir, 1);
  pair.g2 = build_store(dir, 2);

  // Rebuild the original-id maps for the reference alignment.
  IdTable e1 = load_id_table(dir / "ent_ids_1");
  IdTable e2 = load_id_table(dir / "ent_ids_2");
  const auto ref_file = dir / "ref_ent_ids";
  const auto lines = read_tsv(ref_file, 2);
  std::unordered_set<std::uint32_t> seen_left, seen_right;
  pair.alignment.reserve(lines.size());
  for (const auto& raw : lines) {
    const std::int64_t a = parse_id(raw.fields[0], ref_file, raw.line_no);
    const std::int64_t b = parse_id(raw.fields[1], ref_file, raw.line_no);
    const auto ia = e1.dense.find(a);
    const auto ib = e2.dense.find(b);
    if (ia == e1.dense.end())
      throw std::runtime_error("ref_ent_ids: entity id " + std::to_string(a) +
                               " absent from ent_ids_1");
    if (ib == e2.dense.end())
      throw std::runtime_error("ref_ent_ids: entity id " + std::to_string(b) +
                               " absent from ent_ids_2");
    if (!seen_left.insert(ia->second).second || !seen_right.insert(ib->second).second)
      throw std::runtime_error("ref_ent_ids: duplicate alignment entry at line " +
                               std::to_string(raw.line_no));
    pair.alignment.push_back({ia->second, ib->second});
  }
  std::sort(pair.alignment.begin(), pair.alignment.end());
  return pair;
}

void save_kg_pair(const KnowledgeGraphPair& pair, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write_ids = [&](const std::filesystem::path& file, const std::vector<std::string>& uris) {
    std::ofstream out(file, std::ios::binary);
    if (!out.is_open()) throw std::runtime_error("cannot write " + file.string());
    for (std::size_t i = 0; i < uris.size(); ++i) out << i << '\t' << uris[i] << '\n';
  };
  auto write_triples = [&](const std::filesystem::path& file, const std::vector<Triple>& ts) {
    std::ofstream out(file, std::ios::binary);
    if (!out.is_open()) throw std::runtime_error("cannot write " + file.string());
    for (const auto& t : ts) out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
  };
  write_ids(dir / "ent_ids_1", pair.g1.entity_uris);
  write_ids(dir / "ent_ids_2", pair.g2.entity_uris);
  write_ids(dir / "rel_ids_1", pair.g1.relation_uris);
  write_ids(dir / "rel_ids_2", pair.g2.relation_uris);
  write_triples(dir / "triples_1", pair.g1.triples);
  write_triples(dir / "triples_2", pair.g2.triples);
  std::ofstream out(dir / "ref_ent_ids", std::ios::binary);
  if (!out.is_open()) throw std::runtime_error("cannot write " + (dir / "ref_ent_ids").string());
  for (const auto& p : pair.alignment) out << p.left << '\t' << p.right << '\n';
}

void validate(const KnowledgeGraphPair& pair) {
  auto check_store = [](const TripleStore& s, const char* tag) {
    if (s.entity_uris.size() != s.entity_count || s.relation_uris.size() != s.relation_count)
      throw std::runtime_error(std::string(tag) + ": uri table size mismatch");
    for (const auto& t : s.triples) {
      if (t.head >= s.entity_count || t.tail >= s.entity_count)
        throw std::runtime_error(std::string(tag) + ": triple entity id out of range");
      if (t.relation >= s.relation_count)
        throw std::runtime_error(std::string(tag) + ": triple relation id out of range");
    }
    for (std::size_t i = 1; i < s.triples.size(); ++i)
      if (s.triples[i] == s.triples[i - 1])
        throw std::runtime_error(std::string(tag) + ": duplicate triple");
  };
  check_store(pair.g1, "g1");
  check_store(pair.g2, "g2");
  std::unordered_set<std::uint32_t> left, right;
  for (const auto& p : pair.alignment) {
    if (p.left >= pair.g1.entity_count || p.right >= pair.g2.entity_count)
      throw std::runtime_error("alignment: id out of range");
    if (!left.insert(p.left).second || !right.insert(p.right).second)
      throw std::runtime_error("alignment: entity appears twice on the same side");
  }
}

SeedSplit split_seeds(const KnowledgeGraphPair& pair, double train_ratio, std::uint64_t rng_seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0))
    throw std::invalid_argument("split_seeds: train_ratio must be in (0, 1)");
  if (pair.alignment.size() < 2)
    throw std::runtime_error("split_seeds: need at least 2 aligned pairs");
  std::vector<AlignedPair> shuffled = pair.alignment;
  Rng rng(rng_seed);
  rng.shuffle(shuffled);
  // The nudge keeps 0.3 * 15000 from landing just below 4500 in binary.
  const auto k = (std::size_t)std::floor(train_ratio * (double)shuffled.size() + 1e-9);
  SeedSplit split;
  split.rng_seed = rng_seed;
  split.train.assign(shuffled.begin(), shuffled.begin() + k);
  split.test.assign(shuffled.begin() + k, shuffled.end());
  return split;
}

NeighborIndex build_union_index(const KnowledgeGraphPair& pair) {
  NeighborIndex idx;
  idx.g1_entity_count = pair.g1.entity_count;
  idx.g1_relation_count = pair.g1.relation_count;
  idx.original_relation_count = pair.g1.relation_count + pair.g2.relation_count;
  idx.unified_entity_count = pair.g1.entity_count + pair.g2.entity_count;
  idx.unified_relation_count = 2 * idx.original_relation_count + 1;

  const std::size_t n = idx.unified_entity_count;
  const std::size_t edge_total = 2 * (pair.g1.triples.size() + pair.g2.triples.size()) + n;
  std::vector<std::size_t> degree(n, 1);  // every entity gets one self-loop
  auto count_side = [&](const TripleStore& s, std::size_t ent_off) {
    for (const auto& t : s.triples) {
      ++degree[ent_off + t.head];
      ++degree[ent_off + t.tail];
    }
  };
  count_side(pair.g1, 0);
  count_side(pair.g2, pair.g1.entity_count);

  idx.edge_offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) idx.edge_offsets[i + 1] = idx.edge_offsets[i] + degree[i];
  idx.edge_neighbor.resize(edge_total);
  idx.edge_relation.resize(edge_total);

  std::vector<std::size_t> cursor(idx.edge_offsets.begin(), idx.edge_offsets.end() - 1);
  auto put = [&](std::size_t entity, std::uint32_t nbr, std::uint32_t rel) {
    const std::size_t pos = cursor[entity]++;
    idx.edge_neighbor[pos] = nbr;
    idx.edge_relation[pos] = rel;
  };
  auto fill_side = [&](const TripleStore& s, std::uint32_t ent_off, std::uint32_t rel_off) {
    for (const auto& t : s.triples) {
      const std::uint32_t h = ent_off + t.head;
      const std::uint32_t tl = ent_off + t.tail;
      const std::uint32_t r = rel_off + t.relation;
      put(h, tl, r);
      put(tl, h, idx.inverse_relation(r));
    }
  };
  fill_side(pair.g1, 0, 0);
  fill_side(pair.g2, (std::uint32_t)pair.g1.entity_count, (std::uint32_t)pair.g1.relation_count);
  for (std::size_t i = 0; i < n; ++i) put(i, (std::uint32_t)i, idx.self_loop_relation());

  // Sort each entity's list by (neighbor, relation) for a fixed reduction order.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = idx.edge_offsets[i], e = idx.edge_offsets[i + 1];
    std::vector<std::pair<std::uint32_t, std::uint32_t>> tmp;
    tmp.reserve(e - b);
    for (std::size_t p = b; p < e; ++p) tmp.emplace_back(idx.edge_neighbor[p], idx.edge_relation[p]);
    std::sort(tmp.begin(), tmp.end());
    for (std::size_t p = b; p < e; ++p) {
      idx.edge_neighbor[p] = tmp[p - b].first;
      idx.edge_relation[p] = tmp[p - b].second;
    }
  }
  return idx;
}

}  // namespace refl
