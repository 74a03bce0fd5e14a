#include <gtest/gtest.h>

#include <cmath>

#include "voterdyn/dynamics.hpp"

using namespace voterdyn;

namespace {

OneWayParams base_params() {
  OneWayParams p;
  p.n = 10;
  p.p0 = 0.1;
  p.gamma_mp = 0.33;
  p.gamma_pm = 0.33;
  p.pi_plus = 0.8;
  p.pi_minus = 0.2;
  p.q0 = 0.5;
  p.horizon = 3.0;
  return p;
}

// |x - target| <= 3 SE for a Bernoulli frequency.
void expect_frequency(double hits, double trials, double target) {
  const double se = std::sqrt(target * (1.0 - target) / trials);
  EXPECT_NEAR(hits / trials, target, 3.0 * se + 1e-12);
}

}  // namespace

TEST(Rng, CounterStreamsAreStable) {
  rng::Stream a(rng::vertex_key(1, 2, 3));
  rng::Stream b(rng::vertex_key(1, 2, 3));
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
  EXPECT_EQ(rng::edge_key(5, 0, 3, 9), rng::edge_key(5, 0, 9, 3));
  EXPECT_NE(rng::edge_key(5, 0, 3, 9), rng::edge_key(5, 1, 3, 9));
  EXPECT_EQ(rng::uniform_at(42, 7), rng::Stream(42, 7).uniform());
}

TEST(Rng, UniformMoments) {
  rng::Stream s(99);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 3.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sq / n, 1.0 / 3.0, 0.005);
}

TEST(OpinionPath, QueriesAreRightContinuous) {
  OpinionPath p(Opinion::minus, {1.0, 2.0});
  EXPECT_EQ(p.at(0.5), Opinion::minus);
  EXPECT_EQ(p.at(1.0), Opinion::plus);
  EXPECT_EQ(p.before(1.0), Opinion::minus);
  EXPECT_EQ(p.at(2.5), Opinion::minus);
  EXPECT_THROW(OpinionPath(Opinion::plus, {2.0, 1.0}), RangeError);
}

TEST(OpinionPath, ZeroRatesNeverFlip) {
  auto p = base_params();
  p.gamma_mp = p.gamma_pm = 0.0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    rng::Stream s(k);
    EXPECT_TRUE(simulate_opinion_path(p, s).flip_times().empty());
  }
}

TEST(OpinionPath, AbsorbingPlus) {
  auto p = base_params();
  p.gamma_mp = 1.0;
  p.gamma_pm = 0.0;
  p.q0 = 0.0;
  p.horizon = 100.0;
  double flipped_by_one = 0;
  const int reps = 20000;
  for (int k = 0; k < reps; ++k) {
    rng::Stream s(rng::derive_key(3, {static_cast<std::uint64_t>(k)}));
    const auto path = simulate_opinion_path(p, s);
    ASSERT_LE(path.flip_times().size(), 1u);
    if (!path.flip_times().empty() && path.flip_times()[0] <= 1.0) ++flipped_by_one;
  }
  expect_frequency(flipped_by_one, reps, 1.0 - std::exp(-1.0));
}

TEST(OpinionPath, SymmetricMarginal) {
  auto p = base_params();
  p.gamma_mp = p.gamma_pm = 1.0;
  const int reps = 100000;
  double plus = 0;
  for (int k = 0; k < reps; ++k) {
    rng::Stream s(rng::derive_key(4, {static_cast<std::uint64_t>(k)}));
    if (simulate_opinion_path(p, s).at(1.7) == Opinion::plus) ++plus;
  }
  expect_frequency(plus, reps, 0.5);
}

TEST(OpinionPath, AnalyticMarginal) {
  auto p = base_params();
  EXPECT_DOUBLE_EQ(analytic_p_plus(0.0, p), p.q0);
  EXPECT_DOUBLE_EQ(analytic_p_plus(2.0, p), 0.5);
  p.gamma_mp = p.gamma_pm = 1.0;
  p.q0 = 0.0;
  EXPECT_NEAR(analytic_p_plus(1.0, p), 0.5 * (1.0 - std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(analytic_p_plus(1.0, p), 0.43233, 1e-5);
  p.gamma_mp = p.gamma_pm = 0.0;
  p.q0 = 0.3;
  EXPECT_DOUBLE_EQ(analytic_p_plus(5.0, p), 0.3);
  EXPECT_THROW(analytic_p_plus(-1.0, p), RangeError);
}

TEST(OpinionPath, MarginalMatchesSimulation) {
  auto p = base_params();
  p.gamma_mp = 0.7;
  p.gamma_pm = 0.2;
  p.q0 = 0.1;
  const int reps = 200000;
  double plus = 0;
  for (int k = 0; k < reps; ++k) {
    rng::Stream s(rng::derive_key(5, {static_cast<std::uint64_t>(k)}));
    if (simulate_opinion_path(p, s).at(1.3) == Opinion::plus) ++plus;
  }
  expect_frequency(plus, reps, analytic_p_plus(1.3, p));
}

TEST(VertexType, ClosedForms) {
  const OpinionPath plus(Opinion::plus);
  const OpinionPath minus(Opinion::minus);
  for (double t : {0.0, 0.3, 1.0, 4.0}) {
    EXPECT_NEAR(vertex_type(plus, 0.0, t), 1.0 - std::exp(-t), 1e-14);
    EXPECT_NEAR(vertex_type(minus, 0.0, t), 0.0, 1e-15);
    EXPECT_NEAR(vertex_type(minus, 1.0, t), std::exp(-t), 1e-15);
  }
  // + on [0,1), - afterwards: type at t is e^{-(t-1)} - e^{-t}.
  const OpinionPath flip(Opinion::plus, {1.0});
  EXPECT_NEAR(vertex_type(flip, 0.0, 2.0), std::exp(-1.0) - std::exp(-2.0), 1e-14);
}

TEST(VertexType, StaysInBounds) {
  auto p = base_params();
  p.gamma_mp = p.gamma_pm = 2.0;
  for (std::uint64_t k = 0; k < 200; ++k) {
    rng::Stream s(k);
    const auto path = simulate_opinion_path(p, s);
    for (double t : {0.1, 1.0, 2.9}) {
      for (double y0 : {0.0, 0.4, 1.0}) {
        const double y = vertex_type(path, y0, t);
        EXPECT_GE(y, std::exp(-t) * y0 - 1e-12);
        EXPECT_LE(y, std::exp(-t) * y0 + 1.0 - std::exp(-t) + 1e-12);
      }
    }
  }
}

TEST(ConditionalEdge, ClosedForms) {
  auto p = base_params();
  const OpinionPath plus(Opinion::plus);
  const OpinionPath minus(Opinion::minus);
  const double t = 1.4;
  const double e = std::exp(-t);
  EXPECT_NEAR(conditional_edge_prob(minus, minus, t, p), p.p0 * e + p.pi_minus * (1 - e), 1e-14);
  EXPECT_NEAR(conditional_edge_prob(plus, plus, t, p), p.p0 * e + p.pi_plus * (1 - e), 1e-14);
  EXPECT_NEAR(conditional_edge_prob(plus, minus, t, p), p.p0 * e + 0.5 * (p.pi_plus + p.pi_minus) * (1 - e), 1e-14);
  p.pi_plus = p.pi_minus = 0.35;
  const OpinionPath wiggly(Opinion::plus, {0.2, 0.5, 1.1});
  EXPECT_NEAR(conditional_edge_prob(wiggly, minus, t, p), p.p0 * e + 0.35 * (1 - e), 1e-14);
}

TEST(ConditionalEdge, JointReducesToMarginal) {
  const auto p = base_params();
  const OpinionPath a(Opinion::plus, {0.4, 1.5});
  const OpinionPath b(Opinion::minus, {0.9});
  const double t1[] = {1.2};
  EXPECT_NEAR(conditional_edge_joint(a, b, t1, p.edge_law()), conditional_edge_prob(a, b, 1.2, p), 1e-15);
  // With pi = 1 everywhere and p0 = 1 the edge is always active.
  EdgeLaw always{1.0, 1.0, 1.0};
  const double ts[] = {0.3, 1.0, 2.2};
  EXPECT_NEAR(conditional_edge_joint(a, b, ts, always), 1.0, 1e-14);
}

TEST(ConditionalEdge, JointMatchesRingSimulation) {
  // Two fixed paths; simulate only edge clocks and compare the joint frequency.
  auto p = base_params();
  p.n = 2;
  p.gamma_mp = p.gamma_pm = 0.0;
  const OpinionPath a(Opinion::plus);
  const OpinionPath b(Opinion::plus);
  const double ts[] = {0.7, 1.6};
  const double target = conditional_edge_joint(a, b, ts, p.edge_law());
  p.q0 = 1.0;
  const int reps = 40000;
  double hits = 0;
  for (int r = 0; r < reps; ++r) {
    auto tr = Trajectory::one_way(p, 21, static_cast<std::uint64_t>(r));
    if (tr.edge_active(0, 1, 0.7) && tr.edge_active(0, 1, 1.6)) ++hits;
  }
  expect_frequency(hits, reps, target);
}

TEST(Trajectory, QueriesAreDeterministic) {
  const auto p = base_params();
  auto a = Trajectory::one_way(p, 77, 3);
  auto b = Trajectory::one_way(p, 77, 3);
  // Touch edges in different orders.
  const bool x = a.edge_active(2, 7, 1.0);
  b.edge_active(0, 1, 2.0);
  b.edge_active(5, 6, 0.5);
  EXPECT_EQ(b.edge_active(7, 2, 1.0), x);
  EXPECT_EQ(a.state(1.5), b.state(1.5));
  EXPECT_EQ(a.state(1.5), a.state(1.5));
  EXPECT_EQ(a.edge_history(3, 4), b.edge_history(4, 3));
  EXPECT_THROW(a.state(-0.1), RangeError);
  EXPECT_THROW(a.state(3.1), RangeError);
  EXPECT_THROW(a.edge_active(1, 1, 1.0), RangeError);
}

TEST(Trajectory, HistoryAgreesWithQueries) {
  const auto p = base_params();
  auto tr = Trajectory::one_way(p, 5, 0);
  for (std::size_t u = 0; u < p.n; ++u)
    for (std::size_t v = u + 1; v < p.n; ++v) {
      const auto h = tr.edge_history(u, v);
      for (double t : {0.0, 0.25, 1.0, 2.0, 3.0}) EXPECT_EQ(h.at(t), tr.edge_active(u, v, t));
      for (const auto& ring : h.rings) EXPECT_EQ(tr.edge_active(u, v, ring.time), ring.outcome);
    }
}

TEST(Trajectory, HorizonConsistentPrefix) {
  auto p = base_params();
  auto short_run = Trajectory::one_way(p, 8, 1);
  p.horizon = 6.0;
  auto long_run = Trajectory::one_way(p, 8, 1);
  EXPECT_EQ(short_run.state(2.5), long_run.state(2.5));
}

TEST(Trajectory, EventsReplayStates) {
  auto p = base_params();
  p.gamma_mp = p.gamma_pm = 1.0;
  auto tr = Trajectory::one_way(p, 9, 0);
  GraphState g = tr.state(0.5);
  const auto events = tr.events(0.5, 2.5);
  ASSERT_FALSE(events.empty());
  for (const auto& e : events) {
    if (e.kind == TrajectoryEvent::Kind::edge) {
      EXPECT_NE(g.has_edge(e.u, e.v), e.value);
      g.set_edge(e.u, e.v, e.value);
    } else {
      g.set_opinion(e.u, e.value ? Opinion::plus : Opinion::minus);
    }
  }
  EXPECT_EQ(g, tr.state(2.5));
  // No events in (T - eps, T] means identical states.
  const double last = events.back().time;
  if (last < 2.5) {
    EXPECT_EQ(tr.state(last), tr.state(2.5));
  }
}

TEST(Trajectory, DegenerateEdgeLaws) {
  auto p = base_params();
  p.pi_plus = p.pi_minus = 1.0;
  p.p0 = 0.0;
  auto tr = Trajectory::one_way(p, 10, 0);
  for (std::size_t u = 0; u < p.n; ++u)
    for (std::size_t v = u + 1; v < p.n; ++v) {
      const auto h = tr.edge_history(u, v);
      EXPECT_FALSE(h.initial_active);
      for (const auto& r : h.rings) EXPECT_TRUE(r.outcome);
      if (!h.rings.empty()) {
        EXPECT_FALSE(tr.edge_active(u, v, h.rings[0].time * 0.5));
        EXPECT_TRUE(tr.edge_active(u, v, h.rings[0].time));
      }
    }
}

TEST(Trajectory, InitialDensity) {
  auto p = base_params();
  p.n = 150;
  auto tr = Trajectory::one_way(p, 12, 0);
  const auto g = tr.state(0.0);
  const double pairs = 150.0 * 149.0 / 2.0;
  expect_frequency(static_cast<double>(g.edge_count()), pairs, 0.1);
}

TEST(Trajectory, SymmetricEdgeMarginal) {
  auto p = base_params();
  p.n = 2;
  p.pi_plus = p.pi_minus = 0.6;
  const double t = 0.8;
  const int reps = 40000;
  double hits = 0;
  for (int r = 0; r < reps; ++r) {
    auto tr = Trajectory::one_way(p, 13, static_cast<std::uint64_t>(r));
    if (tr.edge_active(0, 1, t)) ++hits;
  }
  expect_frequency(hits, reps, p.p0 * std::exp(-t) + 0.6 * (1 - std::exp(-t)));
}

TEST(Trajectory, ConditionalProbabilityMatchesFrequency) {
  // Law of total expectation: E[conditional prob] = P(edge active).
  auto p = base_params();
  p.n = 2;
  p.gamma_mp = 0.5;
  p.gamma_pm = 0.9;
  const double t = 1.5;
  const int reps = 100000;
  double hits = 0;
  double cond = 0;
  double cond_sq = 0;
  for (int r = 0; r < reps; ++r) {
    auto tr = Trajectory::one_way(p, 14, static_cast<std::uint64_t>(r));
    if (tr.edge_active(0, 1, t)) ++hits;
    const double c = conditional_edge_prob(tr.opinion_path(0), tr.opinion_path(1), t, p);
    cond += c;
    cond_sq += c * c;
  }
  const double f = hits / reps;
  const double m = cond / reps;
  const double se = std::sqrt(f * (1 - f) / reps + (cond_sq / reps - m * m) / reps);
  EXPECT_NEAR(f, m, 3.0 * se);
}

TEST(Trajectory, OneWayIndependenceOfOpinionAndEdge) {
  auto p = base_params();
  p.n = 4;
  const int reps = 10000;
  double sx = 0, sa = 0, sxa = 0;
  for (int r = 0; r < reps; ++r) {
    auto tr = Trajectory::one_way(p, 15, static_cast<std::uint64_t>(r));
    const double x = tr.opinion(0, 1.0) == Opinion::plus ? 1.0 : 0.0;
    const double a = tr.edge_active(1, 2, 1.0) ? 1.0 : 0.0;
    sx += x;
    sa += a;
    sxa += x * a;
  }
  const double mx = sx / reps;
  const double ma = sa / reps;
  const double cov = sxa / reps - mx * ma;
  const double se = std::sqrt(mx * (1 - mx) * ma * (1 - ma) / reps);
  EXPECT_NEAR(cov, 0.0, 3.0 * se);
}

TEST(TwoWay, FrozenOpinionsWithoutClock) {
  TwoWayParams p;
  p.n = 12;
  p.p0 = 0.1;
  p.pi_plus = 0.8;
  p.pi_minus = 0.2;
  p.horizon = 3.0;
  p.beta = 0.0;
  auto tr = Trajectory::two_way(p, 1, 0);
  for (std::size_t v = 0; v < p.n; ++v) EXPECT_TRUE(tr.opinion_path(v).flip_times().empty());
}

TEST(TwoWay, ConsensusIsAbsorbing) {
  TwoWayParams p;
  p.n = 20;
  p.p0 = 0.1;
  p.pi_plus = 0.8;
  p.pi_minus = 0.2;
  p.q0 = 1.0;
  p.horizon = 8.0;
  p.beta = 1.0;
  auto tr = Trajectory::two_way(p, 2, 0);
  const auto g = tr.state(8.0);
  for (std::size_t v = 0; v < p.n; ++v) EXPECT_EQ(g.opinion(v), Opinion::plus);
  const double pairs = 20.0 * 19.0 / 2.0;
  const double target = 0.1 * std::exp(-8.0) + 0.8 * (1 - std::exp(-8.0));
  expect_frequency(static_cast<double>(g.edge_count()), pairs, target);
}

TEST(TwoWay, CopiesComeFromActiveNeighbors) {
  TwoWayParams p;
  p.n = 15;
  p.p0 = 0.3;
  p.pi_plus = 0.8;
  p.pi_minus = 0.2;
  p.horizon = 4.0;
  p.beta = 0.66;
  auto tr = Trajectory::two_way(p, 3, 0);
  std::size_t flips = 0;
  for (std::size_t v = 0; v < p.n; ++v) {
    for (double f : tr.opinion_path(v).flip_times()) {
      ++flips;
      // Some active neighbor just before f held the new opinion.
      const Opinion now = tr.opinion_path(v).at(f);
      bool witness = false;
      for (std::size_t w = 0; w < p.n && !witness; ++w) {
        if (w == v) continue;
        const auto h = tr.edge_history(v, w);
        bool active = h.initial_active;
        for (const auto& r : h.rings)
          if (r.time < f) active = r.outcome;
        witness = active && tr.opinion_path(w).before(f) == now;
      }
      EXPECT_TRUE(witness) << "vertex " << v << " at " << f;
    }
  }
  EXPECT_GT(flips, 0u);
}

TEST(TwoWay, DeterministicAndMatchesOneWayWhenFrozen) {
  TwoWayParams p;
  p.n = 2;
  p.p0 = 0.1;
  p.pi_plus = 0.8;
  p.pi_minus = 0.2;
  p.horizon = 2.0;
  auto a = Trajectory::two_way(p, 4, 7);
  auto b = Trajectory::two_way(p, 4, 7);
  EXPECT_EQ(a.state(1.0), b.state(1.0));

  OneWayParams q;
  q.n = 2;
  q.p0 = 0.1;
  q.pi_plus = 0.8;
  q.pi_minus = 0.2;
  q.horizon = 2.0;
  const int reps = 20000;
  for (int step = 1; step <= 10; ++step) {
    const double t = 0.2 * step;
    double h2 = 0, h1 = 0;
    for (int r = 0; r < reps; ++r) {
      auto x = Trajectory::two_way(p, 30, static_cast<std::uint64_t>(r));
      auto y = Trajectory::one_way(q, 31, static_cast<std::uint64_t>(r));
      h2 += x.edge_active(0, 1, t) ? 1 : 0;
      h1 += y.edge_active(0, 1, t) ? 1 : 0;
    }
    const double f1 = h1 / reps, f2 = h2 / reps;
    const double se = std::sqrt(f1 * (1 - f1) / reps + f2 * (1 - f2) / reps);
    EXPECT_NEAR(f1, f2, 3.0 * se + 1e-12) << "t=" << t;
  }
}

TEST(Params, Validation) {
  auto p = base_params();
  p.p0 = 1.5;
  EXPECT_THROW(p.validate(), RangeError);
  p = base_params();
  p.gamma_mp = -1.0;
  EXPECT_THROW(p.validate(), RangeError);
  p = base_params();
  p.horizon = 0.0;
  EXPECT_THROW(Trajectory::one_way(p, 1), RangeError);
}
