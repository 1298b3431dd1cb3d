#include <doctest.h>

#include <cmath>
#include <map>

#include "ovcal/diversify.hpp"
#include "ovcal/rng.hpp"
#include "support/oracles.hpp"

using namespace ovcal;

namespace {

CategoryTable tiny_table() {
  CategoryTable t;
  t.entries.push_back({0, "cat00", {"cat00", "cat00_s1", "cat00_s2"}});
  t.entries.push_back({1, "cat01", {"cat01", "cat01_s1"}});
  t.entries.push_back({2, "cat02", {"cat02"}});
  return t;
}

// Builds a unit vector whose cosine against each of the given unit vectors
// equals the requested target, by solving the Gram system in their span and
// topping up the norm with an orthogonal direction.
Vec craft_query(const std::vector<Vec>& embeds, const std::vector<double>& targets) {
  const std::size_t n = embeds.size();
  const std::size_t dim = embeds.front().size();
  // Gram matrix solve (tiny n) by Gaussian elimination.
  std::vector<std::vector<double>> g(n, std::vector<double>(n + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) g[i][j] = dot(embeds[i], embeds[j]);
    g[i][n] = targets[i];
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(g[r][col]) > std::fabs(g[piv][col])) piv = r;
    std::swap(g[col], g[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = g[r][col] / g[col][col];
      for (std::size_t c = col; c <= n; ++c) g[r][c] -= f * g[col][c];
    }
  }
  Vec u(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double coef = g[i][n] / g[i][i];
    for (std::size_t d = 0; d < dim; ++d) u[d] += coef * embeds[i][d];
  }
  // Orthogonal top-up to unit norm keeps all the dot products intact.
  Vec w(dim, 0.0);
  w[dim - 1] = 1.0;
  for (const Vec& e : embeds) {
    const double p = dot(w, e);
    for (std::size_t d = 0; d < dim; ++d) w[d] -= p * e[d];
  }
  const double un = norm(u);
  REQUIRE(un < 1.0);
  const double wn = norm(w);
  REQUIRE(wn > 1e-6);
  const double gamma = std::sqrt(1.0 - un * un) / wn;
  for (std::size_t d = 0; d < dim; ++d) u[d] += gamma * w[d];
  return u;
}

}  // namespace

TEST_CASE("softmax_scores matches the explicit exp/sum oracle") {
  const std::vector<double> cosines{0.9, 0.5, 0.1};
  const auto scores = softmax_scores(cosines, 1.0);
  const auto expect = oracles::softmax_loop(cosines);
  for (std::size_t i = 0; i < 3; ++i) CHECK(scores[i] == doctest::Approx(expect[i]).epsilon(1e-9));
  CHECK_THROWS_AS(softmax_scores({}, 1.0), DomainError);
  CHECK_THROWS_AS(softmax_scores({0.5}, 0.0), DomainError);
}

TEST_CASE("synonym_scores basics") {
  const CategoryTable table = tiny_table();
  const TeacherSpace space = build_teacher(table, {8, 0.4, 0.9, 0.2}, 17);

  SUBCASE("single synonym gives [1]") {
    const auto s = synonym_scores(space.region_embedding(2, 5), table.by_id(2), space);
    REQUIRE(s.scores.size() == 1);
    CHECK(s.scores[0] == doctest::Approx(1.0));
  }

  SUBCASE("equal cosines split the mass evenly") {
    const TeacherSpace flat = build_teacher(table, {8, 0.0, 0.9, 0.2}, 17);  // theta = 0
    const auto s2 = synonym_scores(flat.region_embedding(1, 5), table.by_id(1), flat);
    CHECK(s2.scores[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(s2.scores[1] == doctest::Approx(0.5).epsilon(1e-9));
    const auto s3 = synonym_scores(flat.region_embedding(0, 5), table.by_id(0), flat);
    for (double v : s3.scores) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  }

  SUBCASE("crafted cosines reproduce the direct softmax") {
    // Wide synonym cone so the target cosines are geometrically reachable.
    const TeacherSpace wide = build_teacher(table, {8, 1.4, 0.9, 0.2}, 17);
    std::vector<Vec> embeds;
    for (int s = 0; s < 3; ++s) embeds.push_back(wide.text(0, s));
    const std::vector<double> targets{0.9, 0.5, 0.1};
    const Vec query = craft_query(embeds, targets);
    for (std::size_t i = 0; i < 3; ++i)
      REQUIRE(cosine_sim(query, embeds[i]) == doctest::Approx(targets[i]).epsilon(1e-9));
    const auto s = synonym_scores(query, table.by_id(0), wide, 1.0);
    const auto expect = oracles::softmax_loop(targets);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(s.scores[i] == doctest::Approx(expect[i]).epsilon(1e-8));
  }

  SUBCASE("sum to one, entries in (0,1), scale invariance of the query") {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
      Vec q = rng.normal_vec(8);
      const auto s = synonym_scores(q, table.by_id(0), space);
      double total = 0.0;
      for (double v : s.scores) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        total += v;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
      for (auto& x : q) x *= 7.5;
      const auto s2 = synonym_scores(q, table.by_id(0), space);
      for (std::size_t i = 0; i < s.scores.size(); ++i)
        CHECK(s2.scores[i] == doctest::Approx(s.scores[i]).epsilon(1e-12));
    }
  }
}

namespace {

RegionBatch instance_only_batch(const std::vector<int>& labels) {
  RegionBatch b;
  b.image_id = 1;
  b.features = TokenGrid(4, 4, 8);
  int x = 0;
  for (int label : labels) {
    Grid m(4, 4, 0.0);
    m.at(0, x++) = 1.0;
    b.gt_masks.push_back(m);
    b.gt_labels.push_back(label);
    b.instance_ids.push_back(static_cast<uint64_t>(100 + x));
    b.training_words.emplace_back();
  }
  return b;
}

}  // namespace

TEST_CASE("diversify_labels") {
  const CategoryTable table = tiny_table();
  const TeacherSpace space = build_teacher(table, {8, 0.4, 0.9, 0.2}, 21);

  SUBCASE("degenerate synonym sets leave the batch unchanged") {
    RegionBatch b = instance_only_batch({2, 2});
    diversify_labels(b, table, DiversifyStrategy::Random, 5, space);
    CHECK(b.training_words[0] == "cat02");
    CHECK(b.training_words[1] == "cat02");
  }

  SUBCASE("strategy none restores canonical names") {
    RegionBatch b = instance_only_batch({0, 1});
    diversify_labels(b, table, DiversifyStrategy::None, 5, space);
    CHECK(b.training_words[0] == "cat00");
    CHECK(b.training_words[1] == "cat01");
  }

  SUBCASE("same seed twice gives the identical replacement sequence") {
    RegionBatch a = instance_only_batch({0, 0, 1, 0});
    RegionBatch b = instance_only_batch({0, 0, 1, 0});
    diversify_labels(a, table, DiversifyStrategy::Random, 1234, space);
    diversify_labels(b, table, DiversifyStrategy::Random, 1234, space);
    CHECK(a.training_words == b.training_words);
    diversify_labels(b, table, DiversifyStrategy::Random, 1235, space);
    // different seed: overwhelmingly likely to differ somewhere over repeats
  }

  SUBCASE("unknown category id raises a lookup error") {
    RegionBatch b = instance_only_batch({0});
    b.gt_labels[0] = 9;
    CHECK_THROWS_AS(diversify_labels(b, table, DiversifyStrategy::Random, 5, space), LookupError);
  }

  SUBCASE("drawn words always belong to the instance's synonym set") {
    RegionBatch b = instance_only_batch({0, 1});
    for (uint64_t seed = 0; seed < 50; ++seed) {
      diversify_labels(b, table, DiversifyStrategy::Random, seed, space);
      CHECK(b.training_words[0].substr(0, 5) == "cat00");
      CHECK(b.training_words[1].substr(0, 5) == "cat01");
    }
  }
}

TEST_CASE("sampling frequencies follow the scores") {
  SUBCASE("two equal scores land near one half") {
    const std::vector<double> scores{0.5, 0.5};
    int count0 = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i)
      if (sample_index(scores, mix_seed(777, static_cast<uint64_t>(i))) == 0) ++count0;
    CHECK(std::fabs(count0 / static_cast<double>(draws) - 0.5) < 0.02);
  }

  SUBCASE("chi-square goodness of fit at p > 0.01") {
    // Critical values of chi-square at p = 0.01 for df = 1..6.
    const double critical[] = {6.635, 9.210, 11.345, 13.277, 15.086, 16.812};
    Rng rng(2024);
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 2 + static_cast<int>(rng.next_u64() % 6);
      std::vector<double> cosines(static_cast<std::size_t>(n));
      for (auto& c : cosines) c = rng.normal();
      const auto scores = softmax_scores(cosines, 1.0);
      std::vector<int> counts(static_cast<std::size_t>(n), 0);
      const int draws = 10000;
      for (int i = 0; i < draws; ++i)
        counts[static_cast<std::size_t>(
            sample_index(scores, mix_seed(31 * trial + 7, static_cast<uint64_t>(i))))]++;
      double chi2 = 0.0;
      for (int k = 0; k < n; ++k) {
        const double expect = scores[static_cast<std::size_t>(k)] * draws;
        const double d = counts[static_cast<std::size_t>(k)] - expect;
        chi2 += d * d / expect;
      }
      CHECK(chi2 < critical[n - 2]);
    }
  }
}

TEST_CASE("group_score") {
  const CategoryTable table = tiny_table();
  const TeacherSpace space = build_teacher(table, {8, 0.4, 0.9, 0.2}, 31);

  SUBCASE("all three modes agree on a singleton set") {
    const Vec q = normalized(Rng(5).normal_vec(8));
    const double c = group_score(q, table.by_id(2), space, GroupMode::Canonical);
    CHECK(group_score(q, table.by_id(2), space, GroupMode::GroupMax) == doctest::Approx(c));
    CHECK(group_score(q, table.by_id(2), space, GroupMode::GroupAvg) == doctest::Approx(c));
  }

  SUBCASE("crafted cosines 0.2/0.8 give max 0.8 and mean 0.5") {
    const TeacherSpace wide = build_teacher(tiny_table(), {8, 1.4, 0.9, 0.2}, 31);
    std::vector<Vec> embeds{wide.text(1, 0), wide.text(1, 1)};
    const Vec q = craft_query(embeds, {0.2, 0.8});
    CHECK(group_score(q, table.by_id(1), wide, GroupMode::GroupMax) ==
          doctest::Approx(0.8).epsilon(1e-9));
    CHECK(group_score(q, table.by_id(1), wide, GroupMode::GroupAvg) ==
          doctest::Approx(0.5).epsilon(1e-9));
    CHECK(group_score(q, table.by_id(1), wide, GroupMode::Canonical) ==
          doctest::Approx(0.2).epsilon(1e-9));
  }

  SUBCASE("GroupMax >= GroupAvg >= min cosine on random queries") {
    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
      const Vec q = rng.normal_vec(8);
      double lo = 2.0;
      for (int s = 0; s < 3; ++s) lo = std::min(lo, cosine_sim(q, space.text(0, s)));
      const double mx = group_score(q, table.by_id(0), space, GroupMode::GroupMax);
      const double av = group_score(q, table.by_id(0), space, GroupMode::GroupAvg);
      CHECK(mx >= av - 1e-12);
      CHECK(av >= lo - 1e-12);
      CHECK(mx >= group_score(q, table.by_id(0), space, GroupMode::Canonical) - 1e-12);
    }
  }
}
