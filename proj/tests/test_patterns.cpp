#include <gtest/gtest.h>

#include <random>

#include "voterdyn/patterns.hpp"

using namespace voterdyn;

namespace {

constexpr Opinion P = Opinion::plus;
constexpr Opinion M = Opinion::minus;

VoterPattern random_pattern(std::mt19937_64& gen, std::size_t max_v) {
  std::uniform_int_distribution<std::size_t> vd(1, max_v);
  const std::size_t v = vd(gen);
  std::vector<Opinion> ops(v);
  for (auto& o : ops) o = (gen() & 1) ? P : M;
  std::vector<VoterPattern::Edge> edges;
  for (std::uint32_t a = 0; a < v; ++a)
    for (std::uint32_t b = a + 1; b < v; ++b)
      if (gen() % 2) edges.emplace_back(a, b);
  return build_pattern(ops, edges);
}

VoterPattern relabel(const VoterPattern& h, const std::vector<std::uint32_t>& perm) {
  std::vector<Opinion> ops(h.vertex_count());
  for (std::size_t i = 0; i < perm.size(); ++i) ops[perm[i]] = h.opinion(i);
  std::vector<VoterPattern::Edge> edges;
  for (auto [a, b] : h.edges()) edges.emplace_back(perm[a], perm[b]);
  return build_pattern(ops, edges);
}

}  // namespace

TEST(Patterns, BuildsSmallestPatterns) {
  const auto e = build_pattern({P, P}, {{0, 1}});
  EXPECT_EQ(e.vertex_count(), 2u);
  EXPECT_EQ(e.edge_count(), 1u);
  const auto single = build_pattern({P}, {});
  EXPECT_EQ(single.vertex_count(), 1u);
  EXPECT_EQ(single.edge_count(), 0u);
}

TEST(Patterns, RejectsMalformedEdges) {
  EXPECT_THROW(build_pattern({P, M}, {{0, 0}}), PatternError);
  EXPECT_THROW(build_pattern({P, M}, {{0, 1}, {1, 0}}), PatternError);
  EXPECT_THROW(build_pattern({P, M}, {{0, 2}}), PatternError);
  try {
    build_pattern({P, M}, {{0, 0}});
  } catch (const PatternError& err) {
    EXPECT_NE(std::string(err.what()).find("(0,0)"), std::string::npos) << err.what();
  }
}

TEST(Patterns, CanonicalEdgeOrder) {
  const auto h = build_pattern({P, M, P}, {{2, 1}, {1, 0}});
  ASSERT_EQ(h.edges().size(), 2u);
  EXPECT_EQ(h.edges()[0], (VoterPattern::Edge{0, 1}));
  EXPECT_EQ(h.edges()[1], (VoterPattern::Edge{1, 2}));
}

TEST(Patterns, Isomorphism) {
  EXPECT_TRUE(are_isomorphic(build_pattern({P, P}, {{0, 1}}), build_pattern({P, P}, {{1, 0}})));
  EXPECT_FALSE(are_isomorphic(edge_pattern(P, P), edge_pattern(P, M)));
  EXPECT_FALSE(are_isomorphic(path3_pattern(P, M, P), path3_pattern(M, P, M)));
  EXPECT_TRUE(are_isomorphic(build_pattern({M, P, P}, {{0, 1}, {0, 2}}), path3_pattern(P, M, P)));
}

TEST(Patterns, AutomorphismCounts) {
  EXPECT_EQ(automorphism_count(edge_pattern(P, P)), 2u);
  EXPECT_EQ(automorphism_count(edge_pattern(P, M)), 1u);
  EXPECT_EQ(automorphism_count(triangle_pattern(P, P, P)), 6u);
  EXPECT_EQ(automorphism_count(path3_pattern(P, M, P)), 2u);
  EXPECT_EQ(automorphism_count(triangle_pattern(P, P, M)), 2u);
}

TEST(Patterns, SearchBudget) {
  std::vector<Opinion> ops(9, P);
  const auto big = build_pattern(ops, {});
  EXPECT_THROW(automorphism_count(big), SizeLimitError);
  EXPECT_THROW(are_isomorphic(big, big), SizeLimitError);
}

TEST(Patterns, LabeledCopyCount) {
  EXPECT_EQ(labeled_copy_count(3, edge_pattern(P, P)), 3u);
  EXPECT_EQ(labeled_copy_count(3, triangle_pattern(P, P, P)), 1u);
  EXPECT_EQ(labeled_copy_count(1, edge_pattern(P, P)), 0u);
  EXPECT_EQ(labeled_copy_count(0, single_vertex_pattern(P)), 0u);
  EXPECT_EQ(labeled_copy_count(50, edge_pattern(P, M)), 50u * 49u);
}

TEST(Patterns, EnumerateSmallSets) {
  const std::vector<std::uint32_t> s{1, 2, 3};
  const auto copies = enumerate_labeled_copies(s, edge_pattern(P, P));
  ASSERT_EQ(copies.size(), 3u);
  EXPECT_EQ(copies[0].labels, (std::vector<std::uint32_t>{1, 2}));
  EXPECT_EQ(copies[1].labels, (std::vector<std::uint32_t>{1, 3}));
  EXPECT_EQ(copies[2].labels, (std::vector<std::uint32_t>{2, 3}));

  const std::vector<std::uint32_t> s2{5, 9};
  const auto mixed = enumerate_labeled_copies(s2, edge_pattern(P, M));
  ASSERT_EQ(mixed.size(), 2u);
  EXPECT_NE(mixed[0].opinion_at(0), mixed[1].opinion_at(0));

  const std::vector<std::uint32_t> s3{1};
  EXPECT_TRUE(enumerate_labeled_copies(s3, edge_pattern(P, P)).empty());

  std::vector<std::uint32_t> too_many(13);
  std::iota(too_many.begin(), too_many.end(), 0u);
  EXPECT_THROW(enumerate_labeled_copies(too_many, edge_pattern(P, P)), SizeLimitError);
}

TEST(Patterns, EnumerationMatchesClosedForm) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 60; ++trial) {
    const auto h = random_pattern(gen, 4);
    for (std::uint32_t size = 0; size <= 7; ++size) {
      std::vector<std::uint32_t> labels(size);
      for (std::uint32_t i = 0; i < size; ++i) labels[i] = 3 * i + 1;
      const auto copies = enumerate_labeled_copies(labels, h);
      EXPECT_EQ(copies.size(), labeled_copy_count(size, h)) << to_literal(h) << " |S|=" << size;
      EXPECT_TRUE(std::is_sorted(copies.begin(), copies.end()));
      EXPECT_EQ(std::adjacent_find(copies.begin(), copies.end()), copies.end());
    }
  }
}

TEST(Patterns, AutomorphismDividesFactorial) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto h = random_pattern(gen, 6);
    std::uint64_t fact = 1;
    for (std::uint64_t k = 2; k <= h.vertex_count(); ++k) fact *= k;
    EXPECT_EQ(fact % automorphism_count(h), 0u);
  }
}

TEST(Patterns, IsomorphismIsEquivalence) {
  std::mt19937_64 gen(13);
  std::vector<VoterPattern> pool;
  for (int i = 0; i < 40; ++i) {
    const auto h = random_pattern(gen, 4);
    pool.push_back(h);
    std::vector<std::uint32_t> perm(h.vertex_count());
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), gen);
    pool.push_back(relabel(h, perm));
  }
  for (const auto& a : pool) {
    EXPECT_TRUE(are_isomorphic(a, a));
    for (const auto& b : pool) {
      const bool ab = are_isomorphic(a, b);
      EXPECT_EQ(ab, are_isomorphic(b, a));
      EXPECT_EQ(ab, canonical_form(a) == canonical_form(b));
      if (!ab) continue;
      for (const auto& c : pool)
        if (are_isomorphic(b, c)) {
          EXPECT_TRUE(are_isomorphic(a, c));
        }
    }
  }
}

TEST(Patterns, EachCopyIsOneEmbeddingClass) {
  // Every labeled copy corresponds to |Aut(H)| embeddings of H onto its labels.
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 30; ++trial) {
    const auto h = random_pattern(gen, 4);
    const std::vector<std::uint32_t> labels{0, 1, 2, 3, 4};
    const auto copies = enumerate_labeled_copies(labels, h);
    std::uint64_t embeddings = 0;
    std::vector<std::uint32_t> perm(labels.size());
    std::iota(perm.begin(), perm.end(), 0u);
    std::vector<LabeledVoterGraph> images;
    do {
      // Map pattern vertex i to label perm[i] for i < V.
      std::vector<std::uint32_t> chosen(perm.begin(), perm.begin() + static_cast<long>(h.vertex_count()));
      std::vector<std::uint32_t> sorted = chosen;
      std::sort(sorted.begin(), sorted.end());
      std::vector<std::uint32_t> slot(h.vertex_count());
      for (std::size_t i = 0; i < chosen.size(); ++i)
        slot[i] = static_cast<std::uint32_t>(std::lower_bound(sorted.begin(), sorted.end(), chosen[i]) - sorted.begin());
      LabeledVoterGraph img{sorted, relabel(h, slot)};
      EXPECT_TRUE(std::binary_search(copies.begin(), copies.end(), img));
      ++embeddings;
    } while (std::next_permutation(perm.begin(), perm.end()));
    // Each injective map was counted (5-V)! times by the full permutation loop.
    std::uint64_t rest = 1;
    for (std::uint64_t k = 2; k <= labels.size() - h.vertex_count(); ++k) rest *= k;
    EXPECT_EQ(embeddings / rest, copies.size() * automorphism_count(h));
  }
}

TEST(Patterns, LiteralRoundTrip) {
  const auto h = parse_pattern(" V = 3 ; opinions = +-+ ; edges = 0-1 , 1-2 ");
  EXPECT_EQ(h, path3_pattern(P, M, P));
  EXPECT_EQ(parse_pattern(to_literal(h)), h);
  EXPECT_EQ(parse_pattern("V=1; opinions=+; edges="), single_vertex_pattern(P));
  EXPECT_THROW(parse_pattern("V=2; opinions=+; edges=0-1"), PatternError);
  EXPECT_THROW(parse_pattern("V=2; opinions=+x; edges=0-1"), PatternError);
  EXPECT_THROW(parse_pattern("V=2; opinions=++; edges=0-0"), PatternError);
}

TEST(Patterns, SubgraphRelation) {
  const std::vector<std::uint32_t> labels{2, 4, 7};
  const auto tri = enumerate_labeled_copies(labels, triangle_pattern(P, P, P)).front();
  const std::vector<std::uint32_t> pair{2, 7};
  const auto e = enumerate_labeled_copies(pair, edge_pattern(P, P)).front();
  EXPECT_TRUE(e.is_subgraph_of(tri));
  EXPECT_FALSE(tri.is_subgraph_of(e));
}
