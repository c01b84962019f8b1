#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "refl/kg.hpp"
#include "refl/synth.hpp"

using namespace refl;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* tag) {
  static int counter = 0;
  const fs::path dir =
      fs::temp_directory_path() / ("refl_kg_" + std::string(tag) + "_" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void put(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  out << text;
}

fs::path minimal_dataset() {
  const fs::path dir = fresh_dir("min");
  put(dir / "ent_ids_1", "0\thttp://a/e0\n1\thttp://a/e1\n");
  put(dir / "ent_ids_2", "0\thttp://b/e0\n1\thttp://b/e1\n");
  put(dir / "triples_1", "0\t0\t1\n");
  put(dir / "triples_2", "");
  put(dir / "ref_ent_ids", "0\t0\n1\t1\n");
  return dir;
}

}  // namespace

TEST_CASE("load_kg_pair reads a minimal well-formed directory") {
  const auto pair = load_kg_pair(minimal_dataset());
  CHECK(pair.g1.entity_count == 2);
  CHECK(pair.g2.entity_count == 2);
  CHECK(pair.g1.relation_count == 1);
  CHECK(pair.g1.triples.size() == 1);
  CHECK(pair.g1.triples[0] == Triple{0, 0, 1});
  CHECK(pair.alignment.size() == 2);
  CHECK(pair.g1.entity_uris[1] == "http://a/e1");
  validate(pair);
}

TEST_CASE("load_kg_pair remaps sparse original ids to dense ranges") {
  const fs::path dir = fresh_dir("remap");
  put(dir / "ent_ids_1", "10\tx\n7\ty\n30\tz\n");
  put(dir / "ent_ids_2", "100\tu\n200\tv\n");
  put(dir / "triples_1", "10\t5\t30\n7\t5\t10\n10\t5\t30\n");  // duplicate collapses
  put(dir / "triples_2", "100\t9\t200\n");
  put(dir / "ref_ent_ids", "7\t200\n");
  const auto pair = load_kg_pair(dir);
  CHECK(pair.g1.entity_count == 3);
  CHECK(pair.g1.relation_count == 1);
  CHECK(pair.g1.triples.size() == 2);
  // original id 7 -> dense 0, 10 -> 1, 30 -> 2
  CHECK(pair.g1.triples[0] == Triple{0, 0, 1});
  CHECK(pair.g1.triples[1] == Triple{1, 0, 2});
  CHECK(pair.alignment[0] == AlignedPair{0, 1});
  validate(pair);
}

TEST_CASE("load_kg_pair error paths") {
  SUBCASE("missing ref_ent_ids") {
    const fs::path dir = minimal_dataset();
    fs::remove(dir / "ref_ent_ids");
    CHECK_THROWS_WITH_AS(load_kg_pair(dir), doctest::Contains("missing file"),
                         std::runtime_error);
  }
  SUBCASE("wrong field count") {
    const fs::path dir = minimal_dataset();
    put(dir / "triples_1", "0\t0\n");
    CHECK_THROWS_WITH_AS(load_kg_pair(dir), doctest::Contains("malformed line"),
                         std::runtime_error);
  }
  SUBCASE("non-integer id") {
    const fs::path dir = minimal_dataset();
    put(dir / "ent_ids_1", "zero\ta\n");
    CHECK_THROWS_WITH_AS(load_kg_pair(dir), doctest::Contains("non-integer id"),
                         std::runtime_error);
  }
  SUBCASE("triple references an undeclared entity") {
    const fs::path dir = minimal_dataset();
    put(dir / "triples_1", "0\t0\t9\n");
    CHECK_THROWS_WITH_AS(load_kg_pair(dir), doctest::Contains("absent from ent_ids"),
                         std::runtime_error);
  }
  SUBCASE("duplicate alignment entry") {
    const fs::path dir = minimal_dataset();
    put(dir / "ref_ent_ids", "0\t0\n0\t1\n");
    CHECK_THROWS_WITH_AS(load_kg_pair(dir), doctest::Contains("duplicate alignment"),
                         std::runtime_error);
  }
}

TEST_CASE("triple file order does not change the loaded store") {
  const fs::path a = fresh_dir("order_a");
  const fs::path b = fresh_dir("order_b");
  for (const auto& dir : {a, b}) {
    put(dir / "ent_ids_1", "0\tx\n1\ty\n2\tz\n");
    put(dir / "ent_ids_2", "0\tu\n");
    put(dir / "triples_2", "");
    put(dir / "ref_ent_ids", "0\t0\n");
  }
  put(a / "triples_1", "0\t0\t1\n1\t0\t2\n2\t1\t0\n");
  put(b / "triples_1", "2\t1\t0\n0\t0\t1\n1\t0\t2\n");
  CHECK(load_kg_pair(a) == load_kg_pair(b));
}

TEST_CASE("save then load round-trips the full structure") {
  SynthOptions opts;
  opts.entities = 40;
  opts.relations = 5;
  opts.triples = 120;
  const auto pair = make_aligned_pair(make_random_kg(opts), 0.9, 3);
  const fs::path dir = fresh_dir("roundtrip");
  save_kg_pair(pair, dir);
  const auto reloaded = load_kg_pair(dir);
  CHECK(reloaded == pair);
}

TEST_CASE("split_seeds partitions deterministically") {
  SynthOptions opts;
  opts.entities = 10;
  opts.relations = 2;
  opts.triples = 12;
  const auto pair = make_aligned_pair(make_random_kg(opts), 1.0, 5);
  REQUIRE(pair.alignment.size() == 10);

  const SeedSplit split = split_seeds(pair, 0.3, 7);
  CHECK(split.train.size() == 3);
  CHECK(split.test.size() == 7);

  std::set<AlignedPair> seen(split.train.begin(), split.train.end());
  for (const auto& p : split.test) CHECK(seen.insert(p).second);
  CHECK(seen.size() == pair.alignment.size());

  const SeedSplit again = split_seeds(pair, 0.3, 7);
  CHECK(again.train == split.train);
  CHECK(again.test == split.test);
  CHECK(split_seeds(pair, 0.3, 8).train != split.train);

  // sizes complement for ratios r and 1 - r
  const SeedSplit other = split_seeds(pair, 0.7, 7);
  CHECK(other.train.size() + split.train.size() == pair.alignment.size());

  CHECK_THROWS_AS(split_seeds(pair, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_seeds(pair, 1.0, 1), std::invalid_argument);
}

TEST_CASE("split_seeds takes 4500 of 15000 pairs at ratio 0.3") {
  KnowledgeGraphPair pair;
  pair.g1.entity_count = 15000;
  pair.g2.entity_count = 15000;
  for (std::uint32_t i = 0; i < 15000; ++i) pair.alignment.push_back({i, i});
  const SeedSplit split = split_seeds(pair, 0.3, 1);
  CHECK(split.train.size() == 4500);
  CHECK(split.test.size() == 10500);
}

TEST_CASE("build_union_index applies inverse and self-loop augmentation") {
  const fs::path dir = minimal_dataset();
  // keep only the single g1 triple; make g2 truly empty
  put(dir / "ent_ids_2", "");
  put(dir / "ref_ent_ids", "");
  KnowledgeGraphPair pair = load_kg_pair(dir);
  REQUIRE(pair.g2.entity_count == 0);

  const NeighborIndex idx = build_union_index(pair);
  CHECK(idx.unified_entity_count == 2);
  CHECK(idx.original_relation_count == 1);
  CHECK(idx.unified_relation_count == 3);
  CHECK(idx.self_loop_relation() == 2);
  CHECK(idx.inverse_relation(0) == 1);

  // entity 0: self-loop plus the outgoing edge; sorted by (neighbor, relation)
  REQUIRE(idx.edge_offsets[1] - idx.edge_offsets[0] == 2);
  CHECK(idx.edge_neighbor[0] == 0);
  CHECK(idx.edge_relation[0] == 2);
  CHECK(idx.edge_neighbor[1] == 1);
  CHECK(idx.edge_relation[1] == 0);
  // entity 1: incoming edge as inverse relation, then its self-loop
  CHECK(idx.edge_neighbor[2] == 0);
  CHECK(idx.edge_relation[2] == 1);
  CHECK(idx.edge_neighbor[3] == 1);
  CHECK(idx.edge_relation[3] == 2);
}

TEST_CASE("build_union_index offsets g2 ids") {
  KnowledgeGraphPair pair;
  pair.g1.entity_count = 3;
  pair.g1.relation_count = 1;
  pair.g1.entity_uris = {"a", "b", "c"};
  pair.g1.relation_uris = {"r"};
  pair.g1.triples = {{0, 0, 1}};
  pair.g2.entity_count = 2;
  pair.g2.relation_count = 1;
  pair.g2.entity_uris = {"x", "y"};
  pair.g2.relation_uris = {"s"};
  pair.g2.triples = {{0, 0, 1}};

  const NeighborIndex idx = build_union_index(pair);
  CHECK(idx.unified_entity_count == 5);
  CHECK(idx.unified_relation_count == 5);
  CHECK(idx.unified_g2_entity(0) == 3);
  // g2's triple lands on unified entity 3 with unified relation 1
  const std::size_t b = idx.edge_offsets[3];
  bool found = false;
  for (std::size_t p = b; p < idx.edge_offsets[4]; ++p)
    if (idx.edge_neighbor[p] == 4 && idx.edge_relation[p] == 1) found = true;
  CHECK(found);

  // an isolated entity keeps exactly its self-loop
  CHECK(idx.edge_offsets[3] - idx.edge_offsets[2] == 1);
  CHECK(idx.edge_neighbor[idx.edge_offsets[2]] == 2);
  CHECK(idx.edge_relation[idx.edge_offsets[2]] == idx.self_loop_relation());
}

TEST_CASE("every index edge has its mirror") {
  SynthOptions opts;
  opts.entities = 30;
  opts.relations = 4;
  opts.triples = 90;
  const auto pair = make_aligned_pair(make_random_kg(opts), 1.0, 9);
  const NeighborIndex idx = build_union_index(pair);

  auto has_edge = [&](std::uint32_t e, std::uint32_t nbr, std::uint32_t rel) {
    for (std::size_t p = idx.edge_offsets[e]; p < idx.edge_offsets[e + 1]; ++p)
      if (idx.edge_neighbor[p] == nbr && idx.edge_relation[p] == rel) return true;
    return false;
  };
  for (std::uint32_t e = 0; e < idx.unified_entity_count; ++e) {
    for (std::size_t p = idx.edge_offsets[e]; p < idx.edge_offsets[e + 1]; ++p) {
      const std::uint32_t nbr = idx.edge_neighbor[p];
      const std::uint32_t rel = idx.edge_relation[p];
      const std::uint32_t mirror =
          rel == idx.self_loop_relation() ? rel : idx.inverse_relation(rel);
      CHECK(has_edge(nbr, e, mirror));
    }
  }
}

TEST_CASE("DBP15K directory statistics" * doctest::skip(std::getenv("DBP_ZH_EN_DIR") == nullptr)) {
  // gated on a real dataset: set DBP_ZH_EN_DIR to the DBP15K zh-en directory
  const char* dir = std::getenv("DBP_ZH_EN_DIR");
  REQUIRE(dir != nullptr);
  const auto pair = load_kg_pair(dir);
  CHECK(pair.g1.entity_count == 66469);
  CHECK(pair.g1.relation_count == 2830);
  CHECK(pair.g1.triples.size() == 153929);
  CHECK(pair.alignment.size() == 15000);
  const SeedSplit split = split_seeds(pair, 0.3, 1);
  CHECK(split.train.size() == 4500);
}
