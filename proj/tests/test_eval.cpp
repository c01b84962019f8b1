#include <doctest.h>

#include <cmath>

#include "refl/eval.hpp"
#include "refl/rng.hpp"

using namespace refl;

TEST_CASE("pairwise_scores is cosine on normalized rows") {
  DenseMatrix emb(4, 2);
  emb.at(0, 0) = 2.0;               // (1, 0) after normalization
  emb.at(1, 1) = 5.0;               // (0, 1)
  emb.at(2, 0) = 1.0;               // 45 degrees
  emb.at(2, 1) = 1.0;
  emb.at(3, 0) = 0.5;               // same direction as row 0

  const std::vector<std::uint32_t> left = {0, 1}, right = {3, 1, 2};
  const ScoreMatrix s = pairwise_scores(emb, left, right);
  CHECK(s.at(0, 0) == doctest::Approx(1.0).epsilon(1e-14));      // identical direction
  CHECK(s.at(0, 1) == doctest::Approx(0.0).epsilon(1e-14));      // orthogonal
  CHECK(s.at(0, 2) == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-14));

  DenseMatrix zero(1, 2);
  const std::vector<std::uint32_t> bad = {0};
  CHECK_THROWS_WITH_AS(pairwise_scores(zero, bad, bad), doctest::Contains("zero-norm"),
                       std::runtime_error);
}

TEST_CASE("csls_adjust degenerate and uniform cases") {
  {
    ScoreMatrix s(1, 1);
    s.at(0, 0) = 0.37;
    const ScoreMatrix adj = csls_adjust(s, 1);
    CHECK(adj.at(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
  }
  {
    ScoreMatrix s(3, 4);
    for (double& v : s.values) v = 0.42;
    const ScoreMatrix adj = csls_adjust(s, 2);
    for (double v : adj.values) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
  }
  ScoreMatrix s(3, 3);
  CHECK_THROWS_AS(csls_adjust(s, 0), std::invalid_argument);
  CHECK_THROWS_AS(csls_adjust(s, 4), std::invalid_argument);
}

TEST_CASE("csls_adjust equals the per-cell formula on random matrices") {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    ScoreMatrix s(5, 5);
    for (double& v : s.values) v = rng.normal();
    const std::size_t k = 2;
    const ScoreMatrix adj = csls_adjust(s, k);

    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        std::vector<double> row(s.row(i).begin(), s.row(i).end());
        std::sort(row.begin(), row.end(), std::greater<>());
        std::vector<double> col;
        for (std::size_t r = 0; r < 5; ++r) col.push_back(s.at(r, j));
        std::sort(col.begin(), col.end(), std::greater<>());
        const double expected =
            2.0 * s.at(i, j) - (row[0] + row[1]) / 2.0 - (col[0] + col[1]) / 2.0;
        CHECK(adj.at(i, j) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("compute_ranks order and tie rules") {
  ScoreMatrix s(1, 3);
  s.at(0, 0) = 0.9;
  s.at(0, 1) = 0.5;
  s.at(0, 2) = 0.7;

  const std::pair<std::uint32_t, std::uint32_t> truth_mid[1] = {{0, 1}};
  CHECK(compute_ranks(s, truth_mid, Direction::left_to_right) ==
        std::vector<std::size_t>{3});

  const std::pair<std::uint32_t, std::uint32_t> truth_top[1] = {{0, 0}};
  CHECK(compute_ranks(s, truth_top, Direction::left_to_right) ==
        std::vector<std::size_t>{1});

  // truth tied with a higher-id candidate still ranks first
  s.at(0, 2) = 0.9;
  CHECK(compute_ranks(s, truth_top, Direction::left_to_right) ==
        std::vector<std::size_t>{1});
  // and a tie with a lower-id candidate pushes the truth down
  const std::pair<std::uint32_t, std::uint32_t> truth_late[1] = {{0, 2}};
  CHECK(compute_ranks(s, truth_late, Direction::left_to_right) ==
        std::vector<std::size_t>{2});

  const std::pair<std::uint32_t, std::uint32_t> oob[1] = {{0, 9}};
  CHECK_THROWS_AS(compute_ranks(s, oob, Direction::left_to_right), std::invalid_argument);
}

TEST_CASE("compute_ranks is invariant under increasing transforms") {
  Rng rng(9);
  ScoreMatrix s(6, 6);
  for (double& v : s.values) v = rng.normal();
  std::vector<std::pair<std::uint32_t, std::uint32_t>> truth;
  for (std::uint32_t i = 0; i < 6; ++i) truth.push_back({i, (std::uint32_t)((i + 2) % 6)});

  const auto base = compute_ranks(s, truth, Direction::left_to_right);
  ScoreMatrix t = s;
  for (double& v : t.values) v = std::exp(3.0 * v + 1.0);
  CHECK(compute_ranks(t, truth, Direction::left_to_right) == base);

  const auto r2l = compute_ranks(s, truth, Direction::right_to_left);
  ScoreMatrix u = s;
  for (double& v : u.values) v = std::atan(v) * 2.0 + 7.0;
  CHECK(compute_ranks(u, truth, Direction::right_to_left) == r2l);
}

TEST_CASE("compute_metrics closed forms") {
  {
    const std::size_t ranks[3] = {1, 2, 4};
    const RankingReport rep = compute_metrics(ranks);
    CHECK(rep.hits1 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(rep.mrr == doctest::Approx((1.0 + 0.5 + 0.25) / 3.0).epsilon(1e-15));
  }
  {
    const std::size_t ranks[2] = {1, 1};
    const RankingReport rep = compute_metrics(ranks);
    CHECK(rep.hits1 == 1.0);
    CHECK(rep.mrr == 1.0);
  }
  {
    const std::size_t ranks[2] = {11, 12};
    const RankingReport rep = compute_metrics(ranks);
    CHECK(rep.hits10 == 0.0);
  }
  CHECK_THROWS_AS(compute_metrics(std::span<const std::size_t>{}), std::invalid_argument);
}

TEST_CASE("hits@k is monotone in k") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> ranks(30);
    for (auto& r : ranks) r = 1 + rng.below(15);
    const RankingReport rep = compute_metrics(ranks);
    CHECK(rep.hits1 <= rep.hits5);
    CHECK(rep.hits5 <= rep.hits10);
    CHECK(rep.mrr > 0.0);
    CHECK(rep.mrr <= 1.0);
  }
}
