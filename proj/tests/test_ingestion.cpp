#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "dpmtl/csv.hpp"
#include "dpmtl/split.hpp"

using namespace dpmtl;

namespace {

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_interactions(in);
}

Dataset grid_dataset(std::size_t n, std::size_t m, std::size_t options = 4) {
  Dataset d;
  d.num_users = n;
  d.num_items = m;
  d.options_per_item.assign(m, options);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t i = 0; i < m; ++i)
      d.interactions.push_back({u, i, (u + i) % options, i % options, std::nullopt});
  return d;
}

bool same_interactions(const Dataset& a, const Dataset& b) {
  if (a.interactions.size() != b.interactions.size()) return false;
  for (std::size_t k = 0; k < a.interactions.size(); ++k) {
    const Interaction &x = a.interactions[k], &y = b.interactions[k];
    if (x.user != y.user || x.item != y.item || x.chosen != y.chosen || x.correct != y.correct ||
        x.position != y.position)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("parse_interactions on a minimal file") {
  const Dataset d = parse("user,item,chosen,correct\n0,0,1,1\n");
  CHECK(d.num_users == 1);
  CHECK(d.num_items == 1);
  CHECK(d.options_per_item == std::vector<std::size_t>{2});
  REQUIRE(d.interactions.size() == 1);
  CHECK(correctness_label(d.interactions[0]) == 1);
}

TEST_CASE("parse_interactions reports the offending line") {
  try {
    parse("user,item,chosen,correct\n0,0,abc,1\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line_number == 2);
    CHECK(std::string(e.what()).find("abc") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("bad,header\n"), ParseError);
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("user,item,chosen,correct\n0,0,1\n"), ParseError);
}

TEST_CASE("parse_interactions accepts CRLF and comments") {
  const Dataset d = parse("user,item,chosen,correct\r\n# a comment\r\n1,2,3,0\r\n");
  CHECK(d.num_users == 2);
  CHECK(d.num_items == 3);
  CHECK(d.options_per_item[2] == 4);
  CHECK(d.options_per_item[0] == 2);  // unobserved items default to the minimum
}

TEST_CASE("options directive overrides inference") {
  const Dataset d = parse("user,item,chosen,correct\n#options 0 5\n0,0,1,1\n");
  CHECK(d.options_per_item == std::vector<std::size_t>{5});
  // a directive below the observed indices surfaces as a validation error
  CHECK_THROWS_AS(parse("user,item,chosen,correct\n#options 0 2\n0,0,3,1\n"), ValidationError);
  CHECK_THROWS_AS(parse("user,item,chosen,correct\n#options nope\n0,0,1,1\n"), ParseError);
}

TEST_CASE("position column round-trips") {
  const Dataset d = parse("user,item,chosen,correct,position\n0,0,1,1,7\n0,1,0,1,\n");
  REQUIRE(d.interactions.size() == 2);
  CHECK(d.interactions[0].position == std::size_t{7});
  CHECK_FALSE(d.interactions[1].position.has_value());

  std::ostringstream out;
  write_interactions(d, out);
  const Dataset back = parse(out.str());
  CHECK(same_interactions(d, back));
  CHECK(back.options_per_item == d.options_per_item);
}

TEST_CASE("interaction csv round-trip preserves option counts") {
  Dataset d = grid_dataset(4, 3, 5);
  d.options_per_item[1] = 7;  // count above any observed index
  std::ostringstream out;
  write_interactions(d, out);
  const Dataset back = parse(out.str());
  CHECK(back.num_users == d.num_users);
  CHECK(back.options_per_item == d.options_per_item);
  CHECK(same_interactions(d, back));
}

TEST_CASE("score csv parses and round-trips") {
  std::istringstream in("user,score\n0,512.25\n3,-7.5\n");
  const auto scores = parse_scores(in);
  REQUIRE(scores.size() == 2);
  CHECK(scores.at(0) == 512.25);
  CHECK(scores.at(3) == -7.5);

  std::ostringstream out;
  write_scores(scores, out);
  std::istringstream in2(out.str());
  CHECK(parse_scores(in2) == scores);

  std::istringstream dup("user,score\n0,1\n0,2\n");
  CHECK_THROWS_AS(parse_scores(dup), ParseError);
}

TEST_CASE("zero-missing-pairs file has zero sparsity") {
  std::ostringstream text;
  text << "user,item,chosen,correct\n";
  for (std::size_t u = 0; u < 20; ++u)
    for (std::size_t i = 0; i < 15; ++i) text << u << ',' << i << ',' << (u % 3) << ',' << 2 << '\n';
  const Dataset d = parse(text.str());
  CHECK(d.num_users == 20);
  CHECK(d.num_items == 15);
  CHECK(d.sparsity() == 0.0);
}

TEST_CASE("sparsity mask keeps exactly the rounded fraction") {
  const Dataset d = grid_dataset(10, 10);
  REQUIRE(d.interactions.size() == 100);

  const Dataset identity = apply_sparsity_mask(d, 0.0, 7);
  CHECK(same_interactions(identity, d));

  const Dataset masked = apply_sparsity_mask(d, 0.3, 7);
  CHECK(masked.interactions.size() == 70);

  for (double ratio : {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}) {
    const Dataset m = apply_sparsity_mask(d, ratio, 11);
    CHECK(m.interactions.size() ==
          static_cast<std::size_t>(std::llround((1.0 - ratio) * 100.0)));
    CHECK(validate_dataset(m).empty());
  }

  CHECK_THROWS_AS(apply_sparsity_mask(d, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(apply_sparsity_mask(d, -0.1, 1), ConfigError);
}

TEST_CASE("sparsity mask is deterministic per seed") {
  const Dataset d = grid_dataset(12, 9);
  const Dataset a = apply_sparsity_mask(d, 0.4, 123);
  const Dataset b = apply_sparsity_mask(d, 0.4, 123);
  const Dataset c = apply_sparsity_mask(d, 0.4, 124);
  CHECK(same_interactions(a, b));
  CHECK_FALSE(same_interactions(a, c));
}

TEST_CASE("top_n_filter keeps the most answered rows and columns") {
  // 3 items; item 2 answered by most users
  Dataset d;
  d.num_users = 3;
  d.num_items = 3;
  d.options_per_item = {2, 3, 4};
  d.interactions = {
      {0, 2, 0, 1, std::nullopt}, {1, 2, 1, 1, std::nullopt}, {2, 2, 3, 1, std::nullopt},
      {0, 0, 0, 1, std::nullopt}, {1, 1, 0, 1, std::nullopt},
  };
  const Dataset f = top_n_filter(d, 1.0 / 3.0, 1.0);
  CHECK(f.num_items == 1);
  CHECK(f.options_per_item == std::vector<std::size_t>{4});  // item 2 re-indexed to 0
  CHECK(f.interactions.size() == 3);
  for (const Interaction& x : f.interactions) CHECK(x.item == 0);

  const Dataset unchanged = top_n_filter(d, 1.0, 1.0);
  CHECK(same_interactions(unchanged, d));

  CHECK_THROWS_AS(top_n_filter(d, 0.0, 1.0), ConfigError);
}

TEST_CASE("top_n_filter densifies a monotone-popularity matrix") {
  // user u answers the first u+1 items; item popularity decreases with index
  Dataset d;
  d.num_users = 8;
  d.num_items = 8;
  d.options_per_item.assign(8, 2);
  for (std::size_t u = 0; u < 8; ++u)
    for (std::size_t i = 0; i <= u; ++i) d.interactions.push_back({u, i, 0, 1, std::nullopt});
  const Dataset f = top_n_filter(d, 0.5, 0.5);
  CHECK(f.sparsity() <= d.sparsity());
  CHECK(validate_dataset(f).empty());
}

TEST_CASE("split_dataset stratifies per user") {
  const Dataset d = grid_dataset(3, 10);
  SplitSpec spec;
  spec.train_frac = 0.8;
  spec.val_frac = 0.1;
  spec.test_frac = 0.1;
  spec.seed = 5;
  const DatasetSplit s = split_dataset(d, spec);
  for (std::size_t u = 0; u < 3; ++u) {
    const auto count = [u](const Dataset& part) {
      std::size_t c = 0;
      for (const Interaction& x : part.interactions) c += (x.user == u);
      return c;
    };
    CHECK(count(s.train) == 8);
    CHECK(count(s.val) == 1);
    CHECK(count(s.test) == 1);
  }
}

TEST_CASE("a single-interaction user trains") {
  Dataset d;
  d.num_users = 1;
  d.num_items = 1;
  d.options_per_item = {2};
  d.interactions = {{0, 0, 1, 1, std::nullopt}};
  SplitSpec spec;
  const DatasetSplit s = split_dataset(d, spec);
  CHECK(s.train.interactions.size() == 1);
  CHECK(s.val.interactions.empty());
  CHECK(s.test.interactions.empty());
}

TEST_CASE("by_user split partitions users and scores") {
  Dataset d = grid_dataset(10, 4);
  for (std::size_t u = 0; u < 10; ++u) d.scores[u] = 100.0 + static_cast<double>(u);
  SplitSpec spec;
  spec.train_frac = 0.8;
  spec.val_frac = 0.0;
  spec.test_frac = 0.2;
  spec.unit = SplitUnit::by_user;
  spec.seed = 3;
  const DatasetSplit s = split_dataset(d, spec);
  std::set<std::size_t> train_users, test_users;
  for (const Interaction& x : s.train.interactions) train_users.insert(x.user);
  for (const Interaction& x : s.test.interactions) test_users.insert(x.user);
  CHECK(train_users.size() == 8);
  CHECK(test_users.size() == 2);
  CHECK(s.val.interactions.empty());
  CHECK(s.train.scores.size() == 8);
  CHECK(s.test.scores.size() == 2);
  for (std::size_t u : train_users) CHECK_FALSE(test_users.count(u));
}

TEST_CASE("split parts are disjoint and exhaustive for every seed") {
  SplitMix64 rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    Dataset d;
    d.num_users = 2 + rng.next_below(8);
    d.num_items = 2 + rng.next_below(8);
    d.options_per_item.assign(d.num_items, 3);
    for (std::size_t u = 0; u < d.num_users; ++u)
      for (std::size_t i = 0; i < d.num_items; ++i)
        if (rng.next_double() < 0.8)
          d.interactions.push_back({u, i, rng.next_below(3), rng.next_below(3), std::nullopt});
    SplitSpec spec;
    spec.unit = rep % 2 ? SplitUnit::by_user : SplitUnit::by_interaction;
    spec.seed = rng.next_u64();
    const DatasetSplit s = split_dataset(d, spec);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::size_t total = 0;
    for (const Dataset* part : {&s.train, &s.val, &s.test})
      for (const Interaction& x : part->interactions) {
        CHECK(seen.insert({x.user, x.item}).second);
        ++total;
      }
    CHECK(total == d.interactions.size());
  }
}

TEST_CASE("split_dataset is deterministic per seed") {
  const Dataset d = grid_dataset(6, 9);
  SplitSpec spec;
  spec.seed = 42;
  const DatasetSplit a = split_dataset(d, spec);
  const DatasetSplit b = split_dataset(d, spec);
  CHECK(same_interactions(a.train, b.train));
  CHECK(same_interactions(a.val, b.val));
  CHECK(same_interactions(a.test, b.test));
}

TEST_CASE("split fractions are validated") {
  SplitSpec bad;
  bad.train_frac = 0.5;
  bad.val_frac = 0.2;
  bad.test_frac = 0.2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.test_frac = 0.3;
  CHECK_NOTHROW(bad.validate());
}
