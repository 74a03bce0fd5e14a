#pragma once

// Monte Carlo and semi-analytic estimators of the model constants:
//
//   P_H(t)             probability a fixed labeled copy of H is present
//   C_{H,H'}(s,t)      covariance constant on two copies sharing one vertex
//   Cov(X_i, X_j)      full-count covariance and its n-scaling
//   H(t,u,v)           graphon of edge probabilities given vertex types
//   Wick moments, tightness increments, and the two-way constants C', C^(z).
//
// Every estimator is replication-parallel: replication r of seed s always
// uses the streams of (s, r), results are stored by r and reduced in order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "voterdyn/counting.hpp"
#include "voterdyn/dynamics.hpp"
#include "voterdyn/errors.hpp"
#include "voterdyn/parallel.hpp"
#include "voterdyn/patterns.hpp"
#include "voterdyn/quadrature.hpp"
#include "voterdyn/stats.hpp"

namespace voterdyn {

/// Baseline one-way parameter set used by the canned experiments.
inline OneWayParams standard_one_way_params(std::size_t n = 2, double horizon = 1.0) {
  OneWayParams p;
  p.n = n;
  p.p0 = 0.1;
  p.gamma_mp = 0.33;
  p.gamma_pm = 0.33;
  p.pi_plus = 0.8;
  p.pi_minus = 0.2;
  p.q0 = 0.5;
  p.horizon = horizon;
  return p;
}

/// Two-way parameter set of the published simulation table.
inline TwoWayParams table_two_way_params(std::size_t n = 100, double horizon = 4.0) {
  TwoWayParams p;
  p.n = n;
  p.p0 = 0.1;
  p.pi_plus = 0.8;
  p.pi_minus = 0.2;
  p.q0 = 0.5;
  p.horizon = horizon;
  p.beta = 0.66;
  return p;
}

inline double factorial_real(std::size_t k) {
  double f = 1.0;
  for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
  return f;
}

/// |G_[n](H)| = n! / ((n - V)! A(H)) in floating point (no overflow limit).
inline double labeled_copy_count_real(std::size_t n, const VoterPattern& h) {
  const std::size_t v = h.vertex_count();
  if (n < v) return 0.0;
  double c = 1.0;
  for (std::size_t k = 0; k < v; ++k) c *= static_cast<double>(n - k);
  return c / static_cast<double>(automorphism_count(h));
}

// ---------------------------------------------------------------------------
// Graphon and closed forms

/// H(t,u,v) = p0 e^{-t} + ½[π₊u + π₋(1-e^{-t}-u) + π₊v + π₋(1-e^{-t}-v)].
/// With a nonzero initial type y0 the types are first shifted by e^{-t} y0.
inline double graphon_H(double t, double u, double v, const OneWayParams& params) {
  if (!(t >= 0.0)) throw RangeError("time must be non-negative");
  const double e = std::exp(-t);
  const double lo = e * params.y0;
  const double hi = lo + 1.0 - e;
  constexpr double tol = 1e-9;
  for (double y : {u, v})
    if (!(y >= lo - tol && y <= hi + tol))
      throw RangeError("type " + std::to_string(y) + " outside the feasible range [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "] at t=" + std::to_string(t));
  const double mass = 1.0 - e;
  const double a = u - lo;
  const double b = v - lo;
  const double value = params.p0 * e + 0.5 * (params.pi_plus * a + params.pi_minus * (mass - a) +
                                              params.pi_plus * b + params.pi_minus * (mass - b));
  return std::clamp(value, 0.0, 1.0);
}

inline double opinion_marginal(double t, Opinion o, const OneWayParams& params) {
  const double p = analytic_p_plus(t, params);
  return o == Opinion::plus ? p : 1.0 - p;
}

/// P(edge (u,v) active, x_u(t)=o1, x_v(t)=o2), conditioning on the last ring.
inline double analytic_P_edge(double t, Opinion o1, Opinion o2, const OneWayParams& params) {
  if (!(t >= 0.0)) throw RangeError("time must be non-negative");
  const EdgeLaw law = params.edge_law();
  const double head = std::exp(-t) * params.p0 * opinion_marginal(t, o1, params) * opinion_marginal(t, o2, params);
  if (t == 0.0) return head;
  auto joint = [&](Opinion a, double s, Opinion o) {
    return opinion_marginal(s, a, params) * two_state_transition(params, a, o, t - s);
  };
  auto integrand = [&](double s) {
    double acc = 0.0;
    for (Opinion a : {Opinion::minus, Opinion::plus})
      for (Opinion b : {Opinion::minus, Opinion::plus})
        acc += law.resample_probability(a, b) * joint(a, s, o1) * joint(b, s, o2);
    return std::exp(-(t - s)) * acc;
  };
  return head + integrate(integrand, 0.0, t, 1e-8);
}

/// P_H(t) where a closed form is available: edgeless patterns and single edges.
inline std::optional<double> analytic_P(const VoterPattern& h, double t, const OneWayParams& params) {
  if (h.edge_count() == 0) {
    double p = 1.0;
    for (Opinion o : h.opinions()) p *= opinion_marginal(t, o, params);
    return p;
  }
  if (h.vertex_count() == 2 && h.edge_count() == 1) return analytic_P_edge(t, h.opinion(0), h.opinion(1), params);
  return std::nullopt;
}

/// E X_n(t) = n! P_H(t) / ((n - V)! A(H)).
inline double expected_count(std::size_t n, const VoterPattern& h, double p_h) {
  return labeled_copy_count_real(n, h) * p_h;
}

// ---------------------------------------------------------------------------
// Indicators on trajectories

namespace detail {

inline LabeledVoterGraph identity_placement(const VoterPattern& h, std::uint32_t offset = 0) {
  std::vector<std::uint32_t> labels(h.vertex_count());
  for (std::uint32_t k = 0; k < labels.size(); ++k) labels[k] = offset + k;
  return {labels, h};
}

inline bool placed_indicator(Trajectory& tr, const LabeledVoterGraph& h, double t) {
  for (std::size_t k = 0; k < h.labels.size(); ++k)
    if (tr.opinion(h.labels[k], t) != h.opinion_at(k)) return false;
  for (auto [a, b] : h.pattern.edges())
    if (!tr.edge_active(h.labels[a], h.labels[b], t)) return false;
  return true;
}

/// E[𝕀(h,t) | opinion paths].
inline double conditional_indicator(const Trajectory& tr, const LabeledVoterGraph& h, double t) {
  for (std::size_t k = 0; k < h.labels.size(); ++k)
    if (tr.opinion_path(h.labels[k]).at(t) != h.opinion_at(k)) return 0.0;
  double p = 1.0;
  for (auto [a, b] : h.pattern.edges())
    p *= conditional_edge_prob(tr.opinion_path(h.labels[a]), tr.opinion_path(h.labels[b]), t, tr.edge_law());
  return p;
}

/// E[𝕀(h1,s) 𝕀(h2,t) | opinion paths] for s <= t. Distinct edges are
/// conditionally independent; a shared edge uses the two-time joint.
inline double conditional_product(const Trajectory& tr, const LabeledVoterGraph& h1, double s,
                                  const LabeledVoterGraph& h2, double t) {
  for (std::size_t k = 0; k < h1.labels.size(); ++k)
    if (tr.opinion_path(h1.labels[k]).at(s) != h1.opinion_at(k)) return 0.0;
  for (std::size_t k = 0; k < h2.labels.size(); ++k)
    if (tr.opinion_path(h2.labels[k]).at(t) != h2.opinion_at(k)) return 0.0;
  const auto e1 = h1.labeled_edges();
  const auto e2 = h2.labeled_edges();
  const EdgeLaw& law = tr.edge_law();
  double p = 1.0;
  for (auto [a, b] : e1) {
    const auto& pa = tr.opinion_path(a);
    const auto& pb = tr.opinion_path(b);
    if (std::binary_search(e2.begin(), e2.end(), std::pair{a, b})) {
      const double ts[2] = {s, t};
      p *= conditional_edge_joint(pa, pb, ts, law);
    } else {
      p *= conditional_edge_prob(pa, pb, s, law);
    }
  }
  for (auto [a, b] : e2)
    if (!std::binary_search(e1.begin(), e1.end(), std::pair{a, b}))
      p *= conditional_edge_prob(tr.opinion_path(a), tr.opinion_path(b), t, law);
  return p;
}

inline double positive_horizon(double t, double fallback) { return t > 0.0 ? t : fallback; }

}  // namespace detail

/// Unbiased Cov(A, B) from per-replication A_k, B_k and Q_k with
/// E[Q_k] = E[A_k B_k]: mean(Q) minus the U-statistic for E[A]E[B].
/// SE from the influence values Q - B̄ A - Ā B.
inline EstimateWithError product_moment_covariance(std::span<const double> a, std::span<const double> b,
                                                   std::span<const double> q) {
  const std::size_t r = a.size();
  if (r < 2 || b.size() != r || q.size() != r) throw RangeError("covariance needs >= 2 paired replications");
  const double rr = static_cast<double>(r);
  const double sa = pairwise_sum(a);
  const double sb = pairwise_sum(b);
  std::vector<double> ab(r);
  for (std::size_t k = 0; k < r; ++k) ab[k] = a[k] * b[k];
  const double cross = (sa * sb - pairwise_sum(ab)) / (rr * (rr - 1.0));
  const double value = mean(q) - cross;
  const double ma = sa / rr;
  const double mb = sb / rr;
  std::vector<double> psi(r);
  for (std::size_t k = 0; k < r; ++k) psi[k] = q[k] - mb * a[k] - ma * b[k];
  return {value, std::sqrt(sample_variance(psi) / rr), r};
}

// ---------------------------------------------------------------------------
// P_H(t)

/// Naive estimate: simulate systems on exactly V(H) vertices, average 𝕀.
inline EstimateWithError mc_estimate_P(const VoterPattern& h, double t, const OneWayParams& params, std::size_t R,
                                       std::uint64_t seed, std::size_t workers = 1) {
  if (R < 2) throw RangeError("at least 2 replications are required");
  OneWayParams p = params;
  p.n = h.vertex_count();
  p.horizon = detail::positive_horizon(t, params.horizon);
  const auto copy = detail::identity_placement(h);
  auto values = parallel_map<double>(R, workers, [&](std::size_t r) {
    auto tr = Trajectory::one_way(p, seed, r);
    return detail::placed_indicator(tr, copy, t) ? 1.0 : 0.0;
  });
  return mean_and_se(values);
}

/// Rao-Blackwellized estimate: opinion factors on the simulated paths times
/// the exact conditional edge probabilities given those paths.
inline EstimateWithError rb_estimate_P(const VoterPattern& h, double t, const OneWayParams& params, std::size_t R,
                                       std::uint64_t seed, std::size_t workers = 1) {
  if (R < 2) throw RangeError("at least 2 replications are required");
  OneWayParams p = params;
  p.n = h.vertex_count();
  p.horizon = detail::positive_horizon(t, params.horizon);
  const auto copy = detail::identity_placement(h);
  auto values = parallel_map<double>(R, workers, [&](std::size_t r) {
    const auto tr = Trajectory::one_way(p, seed, r);
    return detail::conditional_indicator(tr, copy, t);
  });
  return mean_and_se(values);
}

// ---------------------------------------------------------------------------
// C_{H,H'}(s,t)

enum class CovarianceMethod : std::uint8_t { naive, rao_blackwell };
enum class Placement : std::uint8_t { shared_vertex, disjoint };

/// C_{H,H'}(s,t) on the minimal system: label sets {0..V-1} and
/// {V-1..V+V'-2} share vertex V-1 (or are disjoint in the diagnostic mode).
/// The double sum of covariances is the covariance of the two copy sums.
inline EstimateWithError estimate_C(const VoterPattern& h1, const VoterPattern& h2, double s, double t,
                                    const OneWayParams& params, std::size_t R, std::uint64_t seed,
                                    CovarianceMethod method = CovarianceMethod::rao_blackwell,
                                    Placement placement = Placement::shared_vertex, std::size_t workers = 1) {
  if (s > t) throw RangeError("estimate_C requires s <= t");
  if (R < 2) throw RangeError("at least 2 replications are required");
  const std::size_t v1 = h1.vertex_count();
  const std::size_t v2 = h2.vertex_count();
  const bool shared = placement == Placement::shared_vertex;
  OneWayParams p = params;
  p.n = shared ? v1 + v2 - 1 : v1 + v2;
  p.horizon = detail::positive_horizon(t, params.horizon);
  std::vector<std::uint32_t> labels1(v1), labels2(v2);
  std::iota(labels1.begin(), labels1.end(), 0u);
  std::iota(labels2.begin(), labels2.end(), static_cast<std::uint32_t>(shared ? v1 - 1 : v1));
  const auto copies1 = enumerate_labeled_copies(labels1, h1);
  const auto copies2 = enumerate_labeled_copies(labels2, h2);

  struct Row {
    double a, b, q;
  };
  auto rows = parallel_map<Row>(R, workers, [&](std::size_t r) {
    auto tr = Trajectory::one_way(p, seed, r);
    Row row{0.0, 0.0, 0.0};
    if (method == CovarianceMethod::naive) {
      for (const auto& c : copies1) row.a += detail::placed_indicator(tr, c, s) ? 1.0 : 0.0;
      for (const auto& c : copies2) row.b += detail::placed_indicator(tr, c, t) ? 1.0 : 0.0;
      row.q = row.a * row.b;
    } else {
      for (const auto& c : copies1) row.a += detail::conditional_indicator(tr, c, s);
      for (const auto& c : copies2) row.b += detail::conditional_indicator(tr, c, t);
      for (const auto& c1 : copies1)
        for (const auto& c2 : copies2) row.q += detail::conditional_product(tr, c1, s, c2, t);
    }
    return row;
  });
  std::vector<double> a(R), b(R), q(R);
  for (std::size_t k = 0; k < R; ++k) {
    a[k] = rows[k].a;
    b[k] = rows[k].b;
    q[k] = rows[k].q;
  }
  const auto cov = product_moment_covariance(a, b, q);
  if (copies1.size() == 1 && copies2.size() == 1 && std::fabs(cov.value) > 0.25 + 1e-12)
    throw ConsistencyError("indicator covariance outside [-1/4, 1/4]");
  const double scale = 1.0 / (factorial_real(v1 - 1) * factorial_real(v2 - 1));
  return {cov.value * scale, cov.std_error * scale, R};
}

/// Closed form of C_{H,H'}(s,t) when π₊ = π₋: edges are then independent of
/// opinions, so only the opinion path of the shared vertex couples the copies.
inline std::optional<double> analytic_C_opinion_free(const VoterPattern& h1, const VoterPattern& h2, double s,
                                                     double t, const OneWayParams& params) {
  if (params.pi_plus != params.pi_minus) return std::nullopt;
  if (s > t) throw RangeError("analytic_C_opinion_free requires s <= t");
  const std::size_t v1 = h1.vertex_count();
  const std::size_t v2 = h2.vertex_count();
  auto edge_prob = [&](double u) { return params.p0 * std::exp(-u) + params.pi_plus * (1.0 - std::exp(-u)); };
  std::vector<std::uint32_t> labels1(v1), labels2(v2);
  std::iota(labels1.begin(), labels1.end(), 0u);
  std::iota(labels2.begin(), labels2.end(), static_cast<std::uint32_t>(v1 - 1));
  const std::uint32_t shared = static_cast<std::uint32_t>(v1 - 1);
  const double edges = std::pow(edge_prob(s), static_cast<double>(h1.edge_count())) *
                       std::pow(edge_prob(t), static_cast<double>(h2.edge_count()));
  double total = 0.0;
  for (const auto& c1 : enumerate_labeled_copies(labels1, h1))
    for (const auto& c2 : enumerate_labeled_copies(labels2, h2)) {
      double rest = edges;
      Opinion a = Opinion::plus, b = Opinion::plus;
      for (std::size_t k = 0; k < v1; ++k) {
        if (c1.labels[k] == shared)
          a = c1.opinion_at(k);
        else
          rest *= opinion_marginal(s, c1.opinion_at(k), params);
      }
      for (std::size_t k = 0; k < v2; ++k) {
        if (c2.labels[k] == shared)
          b = c2.opinion_at(k);
        else
          rest *= opinion_marginal(t, c2.opinion_at(k), params);
      }
      const double joint = opinion_marginal(s, a, params) * two_state_transition(params, a, b, t - s);
      total += rest * (joint - opinion_marginal(s, a, params) * opinion_marginal(t, b, params));
    }
  return total / (factorial_real(v1 - 1) * factorial_real(v2 - 1));
}

// ---------------------------------------------------------------------------
// Full-graph counts

/// Counts of every pattern at every checkpoint, per replication.
struct CountRuns {
  std::size_t n = 0;
  std::vector<VoterPattern> patterns;
  std::vector<double> times;
  std::vector<std::vector<CountVector>> runs;  ///< [replication][time]

  double value(std::size_t r, std::size_t time, std::size_t pattern) const {
    return static_cast<double>(runs[r][time].values[pattern]);
  }
  std::vector<double> series(std::size_t time, std::size_t pattern) const {
    std::vector<double> out(runs.size());
    for (std::size_t r = 0; r < runs.size(); ++r) out[r] = value(r, time, pattern);
    return out;
  }
};

inline CountRuns simulate_one_way_counts(const OneWayParams& params, const std::vector<VoterPattern>& patterns,
                                         const std::vector<double>& times, std::size_t R, std::uint64_t seed,
                                         std::size_t workers = 1, CountingMode mode = CountingMode::full) {
  if (times.empty() || !std::is_sorted(times.begin(), times.end())) throw RangeError("times must be sorted");
  OneWayParams p = params;
  p.horizon = detail::positive_horizon(times.back(), params.horizon);
  CountRuns out{p.n, patterns, times, {}};
  out.runs = parallel_map<std::vector<CountVector>>(R, workers, [&](std::size_t r) {
    auto tr = Trajectory::one_way(p, seed, r);
    return counts_along_trajectory(tr, patterns, times, mode);
  });
  return out;
}

struct FullCovarianceEstimate {
  EstimateWithError covariance;  ///< Cov(X_i(s), X_j(t))
  EstimateWithError scaled;      ///< covariance / n^{V_i + V_j - 1}
  EstimateWithError mean_i;      ///< E X_i(s)
  EstimateWithError mean_j;      ///< E X_j(t)
};

inline FullCovarianceEstimate full_covariance_from_runs(const CountRuns& runs, std::size_t time_i,
                                                        std::size_t pattern_i, std::size_t time_j,
                                                        std::size_t pattern_j) {
  const auto x = runs.series(time_i, pattern_i);
  const auto y = runs.series(time_j, pattern_j);
  FullCovarianceEstimate e;
  e.covariance = covariance_estimate(x, y);
  const double exponent = static_cast<double>(runs.patterns[pattern_i].vertex_count() +
                                              runs.patterns[pattern_j].vertex_count()) - 1.0;
  const double scale = std::pow(static_cast<double>(runs.n), -exponent);
  e.scaled = {e.covariance.value * scale, e.covariance.std_error * scale, e.covariance.replications};
  e.mean_i = mean_and_se(x);
  e.mean_j = mean_and_se(y);
  return e;
}

inline FullCovarianceEstimate estimate_full_covariance(std::size_t n, const VoterPattern& hi, const VoterPattern& hj,
                                                       double s, double t, const OneWayParams& params, std::size_t R,
                                                       std::uint64_t seed, std::size_t workers = 1) {
  if (s > t) throw RangeError("estimate_full_covariance requires s <= t");
  if (n < hi.vertex_count() + hj.vertex_count()) throw RangeError("n must be at least V(H_i) + V(H_j)");
  if (R < 2) throw RangeError("at least 2 replications are required");
  OneWayParams p = params;
  p.n = n;
  std::vector<double> times{s};
  if (t > s) times.push_back(t);
  const auto runs = simulate_one_way_counts(p, {hi, hj}, times, R, seed, workers);
  return full_covariance_from_runs(runs, 0, 0, times.size() - 1, 1);
}

/// Exact finite-n value of Var(X_n(t)) / n^3 for a single-edge pattern in the
/// one-way model, given P_H(t) and C_H(t,t): pairs of copies on the same
/// vertex pair, on pairs sharing one vertex, and disjoint (uncorrelated).
inline double finite_n_scaled_edge_variance(std::size_t n, const VoterPattern& h, double p_h, double c_h) {
  const double nn = static_cast<double>(n);
  const double copies_per_pair = 2.0 / static_cast<double>(automorphism_count(h));
  // Copies on one vertex pair are mutually exclusive when there are two of them.
  const double pair_var = copies_per_pair == 1.0 ? p_h * (1.0 - p_h) : 2.0 * p_h - 4.0 * p_h * p_h;
  const double same_pair = nn * (nn - 1.0) / 2.0 * pair_var;
  const double shared_vertex = nn * (nn - 1.0) * (nn - 2.0) * c_h;
  return (same_pair + shared_vertex) / (nn * nn * nn);
}

// ---------------------------------------------------------------------------
// Standardization, Wick moments, tightness

enum class Centering : std::uint8_t { analytic, empirical };

/// Rows of (X_i(t_p) - E X_i(t_p)) / n^{V_i - 1/2}; coordinate p * m + i.
struct StandardizedSample {
  std::size_t pattern_count = 0;
  std::size_t time_count = 0;
  Centering centering = Centering::empirical;
  std::vector<double> centers;
  std::vector<std::vector<double>> rows;

  std::size_t dimension() const noexcept { return pattern_count * time_count; }
  std::size_t coordinate(std::size_t time, std::size_t pattern) const noexcept {
    return time * pattern_count + pattern;
  }
};

/// Centers by the exact mean when `params` is given and P_H(t) has a closed
/// form for every pattern, otherwise by the pooled sample mean.
inline StandardizedSample standardize(const CountRuns& runs, const std::optional<OneWayParams>& params = std::nullopt) {
  if (runs.runs.size() < 2) throw RangeError("standardization needs at least 2 replications");
  StandardizedSample out;
  out.pattern_count = runs.patterns.size();
  out.time_count = runs.times.size();
  const std::size_t d = out.dimension();
  out.centers.assign(d, 0.0);
  bool analytic = params.has_value();
  if (analytic) {
    for (std::size_t p = 0; p < out.time_count && analytic; ++p)
      for (std::size_t i = 0; i < out.pattern_count && analytic; ++i) {
        const auto ph = analytic_P(runs.patterns[i], runs.times[p], *params);
        if (!ph) {
          analytic = false;
        } else {
          out.centers[out.coordinate(p, i)] = expected_count(runs.n, runs.patterns[i], *ph);
        }
      }
  }
  if (!analytic) {
    for (std::size_t p = 0; p < out.time_count; ++p)
      for (std::size_t i = 0; i < out.pattern_count; ++i) out.centers[out.coordinate(p, i)] = mean(runs.series(p, i));
  }
  out.centering = analytic ? Centering::analytic : Centering::empirical;
  std::vector<double> scale(d);
  for (std::size_t p = 0; p < out.time_count; ++p)
    for (std::size_t i = 0; i < out.pattern_count; ++i)
      scale[out.coordinate(p, i)] =
          std::pow(static_cast<double>(runs.n), static_cast<double>(runs.patterns[i].vertex_count()) - 0.5);
  out.rows.assign(runs.runs.size(), std::vector<double>(d));
  for (std::size_t r = 0; r < runs.runs.size(); ++r)
    for (std::size_t p = 0; p < out.time_count; ++p)
      for (std::size_t i = 0; i < out.pattern_count; ++i) {
        const auto c = out.coordinate(p, i);
        out.rows[r][c] = (runs.value(r, p, i) - out.centers[c]) / scale[c];
      }
  return out;
}

/// Limiting covariance of the standardized coordinates, one estimate_C run
/// per unordered coordinate pair.
struct TargetCovariance {
  std::size_t dim = 0;
  std::vector<EstimateWithError> entries;  ///< row-major, symmetric

  const EstimateWithError& operator()(std::size_t a, std::size_t b) const { return entries.at(a * dim + b); }
  std::vector<double> values() const {
    std::vector<double> v;
    for (const auto& e : entries) v.push_back(e.value);
    return v;
  }
};

inline TargetCovariance estimate_target_covariance(const std::vector<VoterPattern>& patterns,
                                                   const std::vector<double>& times, const OneWayParams& params,
                                                   std::size_t R, std::uint64_t seed, std::size_t workers = 1,
                                                   CovarianceMethod method = CovarianceMethod::rao_blackwell) {
  const std::size_t m = patterns.size();
  TargetCovariance c{m * times.size(), {}};
  c.entries.assign(c.dim * c.dim, {});
  for (std::size_t a = 0; a < c.dim; ++a)
    for (std::size_t b = a; b < c.dim; ++b) {
      const std::size_t pa = a / m, ia = a % m, pb = b / m, ib = b % m;
      const auto key = rng::derive_key(seed, {a, b});
      EstimateWithError e;
      if (times[pa] <= times[pb])
        e = estimate_C(patterns[ia], patterns[ib], times[pa], times[pb], params, R, key, method,
                       Placement::shared_vertex, workers);
      else
        e = estimate_C(patterns[ib], patterns[ia], times[pb], times[pa], params, R, key, method,
                       Placement::shared_vertex, workers);
      c.entries[a * c.dim + b] = c.entries[b * c.dim + a] = e;
    }
  return c;
}

/// σ² = Σ_{a,b} u_a u_b C_ab with the SE of independent entry estimates.
inline EstimateWithError assemble_sigma2(const TargetCovariance& c, std::span<const double> weights) {
  if (weights.size() != c.dim) throw RangeError("weight vector has the wrong dimension");
  double value = 0.0;
  double var = 0.0;
  std::size_t reps = 0;
  for (std::size_t a = 0; a < c.dim; ++a)
    for (std::size_t b = a; b < c.dim; ++b) {
      const double coef = (a == b ? 1.0 : 2.0) * weights[a] * weights[b];
      value += coef * c(a, b).value;
      var += coef * coef * c(a, b).std_error * c(a, b).std_error;
      reps = std::max(reps, c(a, b).replications);
    }
  return {value, std::sqrt(var), reps};
}

inline double double_factorial(int k) {
  double f = 1.0;
  for (int i = k; i > 1; i -= 2) f *= i;
  return f;
}

struct WickMoment {
  int z = 0;
  EstimateWithError moment;  ///< E[ξ^z], bootstrap SE
  double target = 0.0;       ///< σ^z (z-1)!! or 0
  double target_se = 0.0;    ///< propagated from the SE of σ²

  double combined_se() const { return std::hypot(moment.std_error, target_se); }
  bool consistent(double k = 3.0) const { return std::fabs(moment.value - target) < k * combined_se(); }
};

/// Empirical moments of ξ = Σ_a u_a X*_a against the Gaussian targets.
inline std::vector<WickMoment> wick_moments(const StandardizedSample& sample, std::span<const double> weights,
                                            int z_max, const EstimateWithError& sigma2,
                                            std::size_t bootstrap_draws = 500, std::uint64_t seed = 0xb007) {
  if (z_max < 1 || z_max > 6) throw RangeError("z_max must lie in [1, 6]");
  if (weights.size() != sample.dimension()) throw RangeError("weight vector has the wrong dimension");
  const std::size_t r = sample.rows.size();
  if (r < 2) throw RangeError("at least 2 replications are required");
  std::vector<double> xi(r, 0.0);
  for (std::size_t k = 0; k < r; ++k)
    for (std::size_t a = 0; a < weights.size(); ++a) xi[k] += weights[a] * sample.rows[k][a];
  const double s2 = std::max(sigma2.value, 0.0);
  std::vector<WickMoment> out;
  std::vector<double> powers(r);
  for (int z = 1; z <= z_max; ++z) {
    for (std::size_t k = 0; k < r; ++k) powers[k] = std::pow(xi[k], z);
    WickMoment w;
    w.z = z;
    w.moment = {mean(powers), 0.0, r};
    std::vector<double> boots(bootstrap_draws);
    std::vector<double> resample(r);
    for (std::size_t b = 0; b < bootstrap_draws; ++b) {
      rng::Stream s(rng::derive_key(seed, {static_cast<std::uint64_t>(z), b}));
      for (std::size_t k = 0; k < r; ++k) resample[k] = powers[s.below(r)];
      boots[b] = mean(resample);
    }
    w.moment.std_error = bootstrap_draws >= 2 ? std::sqrt(sample_variance(boots)) : 0.0;
    if (z % 2 == 0) {
      const double dfact = double_factorial(z - 1);
      w.target = std::pow(s2, 0.5 * z) * dfact;
      // d(σ^z)/d(σ²) = (z/2) σ^{z-2}
      w.target_se = dfact * 0.5 * z * std::pow(s2, 0.5 * z - 1.0) * sigma2.std_error;
    }
    out.push_back(w);
  }
  return out;
}

/// F_{i,j} = 4 max(γ₋₊, γ₊₋, π₊, π₋)(V_i + E_i + V_j + E_j).
inline double tightness_F(const VoterPattern& hi, const VoterPattern& hj, const OneWayParams& params) {
  const double rate = std::max({params.gamma_mp, params.gamma_pm, params.pi_plus, params.pi_minus});
  return 4.0 * rate *
         static_cast<double>(hi.vertex_count() + hi.edge_count() + hj.vertex_count() + hj.edge_count());
}

/// F_{i,j}^2 ((2 V_{i,j} - 2)!)^3 |t - r|^2 with V_{i,j} = V_i + V_j.
inline double tightness_bound(const VoterPattern& hi, const VoterPattern& hj, double r, double t,
                              const OneWayParams& params) {
  const double f = tightness_F(hi, hj, params);
  const double fact = factorial_real(2 * (hi.vertex_count() + hj.vertex_count()) - 2);
  return f * f * fact * fact * fact * (t - r) * (t - r);
}

struct TightnessResult {
  double r = 0.0, s = 0.0, t = 0.0;
  EstimateWithError lhs;  ///< Δ = E[|X*_i(t) - X*_i(s)|^2 |X*_j(s) - X*_j(r)|^2]
  double rhs = 0.0;

  bool holds(double k = 3.0) const { return lhs.value <= rhs + k * lhs.std_error; }
};

inline TightnessResult tightness_check(std::size_t n, const VoterPattern& hi, const VoterPattern& hj, double r,
                                       double s, double t, const OneWayParams& params, std::size_t R,
                                       std::uint64_t seed, std::size_t workers = 1) {
  if (!(r <= s && s <= t)) throw RangeError("tightness_check requires r <= s <= t");
  OneWayParams p = params;
  p.n = n;
  const std::vector<double> times{r, s, t};
  const auto runs = simulate_one_way_counts(p, {hi, hj}, times, R, seed, workers);
  const auto z = standardize(runs, p);
  std::vector<double> prod(R);
  for (std::size_t k = 0; k < R; ++k) {
    const auto& row = z.rows[k];
    const double di = row[z.coordinate(2, 0)] - row[z.coordinate(1, 0)];
    const double dj = row[z.coordinate(1, 1)] - row[z.coordinate(0, 1)];
    prod[k] = di * di * dj * dj;
  }
  return {r, s, t, mean_and_se(prod), tightness_bound(hi, hj, r, t, p)};
}

// ---------------------------------------------------------------------------
// Two-way constants

struct CprimeEstimate {
  EstimateWithError normalized;  ///< Cov(𝕀, 𝕀') / A(H)^2
  EstimateWithError raw;         ///< Cov(𝕀, 𝕀')
  EstimateWithError p_hat;       ///< P(𝕀 = 1)
};

struct CzEstimate {
  int z = 0;
  EstimateWithError value;  ///< E ∏(𝕀_k - P̂) / A(H)^z
  EstimateWithError raw;    ///< E ∏(𝕀_k - P̂)
  double p_hat = 0.0;       ///< plug-in mean from the same runs (bias O(1/R))
};

namespace detail {

struct MatchingMoments {
  double m1 = 0.0;  ///< matching copies
  double m2 = 0.0;  ///< unordered pairs of vertex-disjoint matching copies
  double m3 = 0.0;  ///< unordered triples of pairwise disjoint matching copies
};

/// Disjoint-copy counts of a single-edge pattern in a snapshot. M is the set
/// of active pairs whose opinions fit the pattern; each fits one copy.
inline MatchingMoments single_edge_matchings(const GraphState& g, const VoterPattern& h) {
  if (h.vertex_count() != 2 || h.edge_count() != 1) throw PatternError("single-edge pattern required");
  const std::size_t n = g.n();
  const std::size_t words = g.words();
  const Opinion o1 = h.opinion(0);
  const Opinion o2 = h.opinion(1);
  std::vector<std::uint64_t> rows(n * words, 0);
  std::vector<std::int64_t> deg(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    const Opinion x = g.opinion(v);
    if (x != o1 && x != o2) continue;
    const Opinion partner = (o1 == o2) ? o1 : negate(x);
    const auto row = g.row(v);
    const auto mask = g.opinion_mask(partner);
    for (std::size_t w = 0; w < words; ++w) {
      rows[v * words + w] = row[w] & mask[w];
      deg[v] += std::popcount(rows[v * words + w]);
    }
  }
  auto choose2 = [](std::int64_t k) { return k * (k - 1) / 2; };
  std::int64_t twice_m = 0, sum_c2 = 0;
  for (std::size_t v = 0; v < n; ++v) {
    twice_m += deg[v];
    sum_c2 += choose2(deg[v]);
  }
  const std::int64_t m = twice_m / 2;
  std::vector<std::int64_t> nsum(n, 0);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t w = 0; w < words; ++w)
      for (std::uint64_t bits = rows[v * words + w]; bits; bits &= bits - 1)
        nsum[v] += deg[w * 64 + static_cast<std::size_t>(std::countr_zero(bits))];
  std::int64_t triple_sum = 0;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t w = 0; w < words; ++w)
      for (std::uint64_t bits = rows[u * words + w]; bits; bits &= bits - 1) {
        const std::size_t v = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
        if (v <= u) continue;
        std::int64_t common = 0;
        for (std::size_t k = 0; k < words; ++k) common += std::popcount(rows[u * words + k] & rows[v * words + k]);
        const std::int64_t rest = m - deg[u] - deg[v] + 1;
        const std::int64_t rest_c2 = sum_c2 - choose2(deg[u]) - choose2(deg[v]) -
                                     (nsum[u] + nsum[v] - 2 * deg[u] - 2 * deg[v] + 2 - common);
        triple_sum += choose2(rest) - rest_c2;
      }
  if (triple_sum % 3 != 0) throw ConsistencyError("3-matching total not divisible by 3");
  return {static_cast<double>(m), static_cast<double>(choose2(m) - sum_c2), static_cast<double>(triple_sum / 3)};
}

inline double falling(std::size_t n, std::size_t k) {
  double f = 1.0;
  for (std::size_t i = 0; i < k; ++i) f *= static_cast<double>(n - i);
  return f;
}

}  // namespace detail

/// Per-replication ingredients of the two-way estimators at one time.
struct TwoWaySample {
  std::vector<std::uint8_t> fixed;  ///< 𝕀 of the z fixed disjoint placements
  double a1 = 0.0, a2 = 0.0, a3 = 0.0;  ///< exchangeable averages (single-edge patterns)
};

/// Simulates the two-way model once per replication up to max(times) and
/// records, at each time, the indicators of `z` disjoint identity placements
/// and (for single-edge patterns) the averages over all disjoint placements.
inline std::vector<std::vector<TwoWaySample>> simulate_two_way_samples(std::size_t n, const VoterPattern& h,
                                                                       const std::vector<double>& times, int z,
                                                                       const TwoWayParams& params, std::size_t R,
                                                                       std::uint64_t seed, std::size_t workers = 1) {
  const std::size_t v = h.vertex_count();
  if (z < 2) throw RangeError("z must be at least 2");
  if (n < static_cast<std::size_t>(z) * v)
    throw RangeError("n=" + std::to_string(n) + " is smaller than z*V(H)=" + std::to_string(z * v));
  if (times.empty() || !std::is_sorted(times.begin(), times.end())) throw RangeError("times must be sorted");
  if (R < 2) throw RangeError("at least 2 replications are required");
  TwoWayParams p = params;
  p.n = n;
  p.horizon = detail::positive_horizon(times.back(), params.horizon);
  std::vector<LabeledVoterGraph> placements;
  for (int k = 0; k < z; ++k) placements.push_back(detail::identity_placement(h, static_cast<std::uint32_t>(k * v)));
  const bool exchangeable = v == 2 && h.edge_count() == 1 && n >= 6;
  const double a = static_cast<double>(automorphism_count(h));
  const double n1 = detail::falling(n, 2) / a;
  const double n2 = exchangeable ? detail::falling(n, 4) / (a * a) : 0.0;
  const double n3 = exchangeable ? detail::falling(n, 6) / (a * a * a) : 0.0;
  return parallel_map<std::vector<TwoWaySample>>(R, workers, [&](std::size_t r) {
    auto tr = Trajectory::two_way(p, seed, r);
    std::vector<TwoWaySample> out;
    for (double t : times) {
      const GraphState g = tr.state(t);
      TwoWaySample s;
      for (const auto& c : placements) s.fixed.push_back(indicator(c, g) ? 1 : 0);
      if (exchangeable) {
        const auto mm = detail::single_edge_matchings(g, h);
        s.a1 = mm.m1 / n1;
        s.a2 = 2.0 * mm.m2 / n2;
        s.a3 = 6.0 * mm.m3 / n3;
      }
      out.push_back(std::move(s));
    }
    return out;
  });
}

inline void check_indicator_covariance(double raw) {
  if (std::fabs(raw) > 0.25 + 1e-12) throw ConsistencyError("indicator covariance outside [-1/4, 1/4]");
}

/// C' from the first two fixed placements.
inline CprimeEstimate cprime_from_samples(const std::vector<std::vector<TwoWaySample>>& runs, std::size_t time,
                                          const VoterPattern& h) {
  const std::size_t r = runs.size();
  std::vector<double> x(r), y(r), pooled;
  for (std::size_t k = 0; k < r; ++k) {
    x[k] = runs[k][time].fixed[0];
    y[k] = runs[k][time].fixed[1];
    pooled.push_back(0.5 * (x[k] + y[k]));
  }
  CprimeEstimate e;
  e.raw = covariance_estimate(x, y);
  check_indicator_covariance(e.raw.value);
  const double a2 = std::pow(static_cast<double>(automorphism_count(h)), 2);
  e.normalized = {e.raw.value / a2, e.raw.std_error / a2, r};
  e.p_hat = mean_and_se(pooled);
  return e;
}

/// C^(z) from the z fixed placements with the pooled plug-in mean.
inline CzEstimate cz_from_samples(const std::vector<std::vector<TwoWaySample>>& runs, std::size_t time, int z,
                                  const VoterPattern& h) {
  const std::size_t r = runs.size();
  if (runs.front()[time].fixed.size() < static_cast<std::size_t>(z)) throw RangeError("not enough placements");
  std::vector<double> all;
  for (const auto& run : runs)
    for (int k = 0; k < z; ++k) all.push_back(run[time].fixed[k]);
  const double p = mean(all);
  std::vector<double> prod(r), dprod(r), rowmean(r);
  for (std::size_t i = 0; i < r; ++i) {
    double full = 1.0;
    double derivative = 0.0;
    double sum = 0.0;
    for (int k = 0; k < z; ++k) {
      double others = 1.0;
      for (int j = 0; j < z; ++j)
        if (j != k) others *= runs[i][time].fixed[j] - p;
      derivative -= others;
      full *= runs[i][time].fixed[k] - p;
      sum += runs[i][time].fixed[k];
    }
    prod[i] = full;
    dprod[i] = derivative;
    rowmean[i] = sum / z;
  }
  const double value = mean(prod);
  const double d = mean(dprod);
  std::vector<double> psi(r);
  for (std::size_t i = 0; i < r; ++i) psi[i] = prod[i] + d * (rowmean[i] - p);
  const double se = std::sqrt(sample_variance(psi) / static_cast<double>(r));
  const double az = std::pow(static_cast<double>(automorphism_count(h)), z);
  CzEstimate e;
  e.z = z;
  e.raw = {value, se, r};
  e.value = {value / az, se / az, r};
  e.p_hat = p;
  return e;
}

/// Exchangeable C' and C^(3): averages over every disjoint placement.
struct ExchangeableEstimate {
  CprimeEstimate cprime;
  CzEstimate c3;
};

inline ExchangeableEstimate exchangeable_from_samples(const std::vector<std::vector<TwoWaySample>>& runs,
                                                      std::size_t time, const VoterPattern& h) {
  const std::size_t r = runs.size();
  const double rr = static_cast<double>(r);
  std::vector<double> a1(r), a2(r), a3(r), sq(r);
  for (std::size_t k = 0; k < r; ++k) {
    a1[k] = runs[k][time].a1;
    a2[k] = runs[k][time].a2;
    a3[k] = runs[k][time].a3;
    sq[k] = a1[k] * a1[k];
  }
  const double p = mean(a1);
  const double e2 = mean(a2);
  const double e3 = mean(a3);
  const double s1 = pairwise_sum(a1);
  const double p_sq = (s1 * s1 - pairwise_sum(sq)) / (rr * (rr - 1.0));
  const double a = static_cast<double>(automorphism_count(h));
  ExchangeableEstimate out;
  std::vector<double> psi(r);
  for (std::size_t k = 0; k < r; ++k) psi[k] = a2[k] - 2.0 * p * a1[k];
  const double cov = e2 - p_sq;
  const double cov_se = std::sqrt(sample_variance(psi) / rr);
  check_indicator_covariance(cov);
  out.cprime.raw = {cov, cov_se, r};
  out.cprime.normalized = {cov / (a * a), cov_se / (a * a), r};
  out.cprime.p_hat = mean_and_se(a1);
  for (std::size_t k = 0; k < r; ++k) psi[k] = a3[k] - 3.0 * p * a2[k] + (6.0 * p * p - 3.0 * e2) * a1[k];
  const double c3 = e3 - 3.0 * p * e2 + 2.0 * p * p * p;
  const double c3_se = std::sqrt(sample_variance(psi) / rr);
  out.c3.z = 3;
  out.c3.raw = {c3, c3_se, r};
  out.c3.value = {c3 / (a * a * a), c3_se / (a * a * a), r};
  out.c3.p_hat = p;
  return out;
}

inline CprimeEstimate estimate_Cprime(std::size_t n, const VoterPattern& h, double t, const TwoWayParams& params,
                                      std::size_t R, std::uint64_t seed, std::size_t workers = 1) {
  const auto runs = simulate_two_way_samples(n, h, {t}, 2, params, R, seed, workers);
  return cprime_from_samples(runs, 0, h);
}

inline CzEstimate estimate_Cz(std::size_t n, const VoterPattern& h, double t, int z, const TwoWayParams& params,
                              std::size_t R, std::uint64_t seed, std::size_t workers = 1) {
  const auto runs = simulate_two_way_samples(n, h, {t}, z, params, R, seed, workers);
  return cz_from_samples(runs, 0, z, h);
}

// ---------------------------------------------------------------------------
// Types and graphon

struct TypeDensity {
  std::vector<double> bin_edges;  ///< bins + 1 edges over [0, 1]
  std::vector<double> f_plus;     ///< density of (x = +, y ∈ bin)
  std::vector<double> f_minus;
  EstimateWithError mass_plus;    ///< ∫ f₊
};

/// Histogram estimates of f±(t, ·) from R single-vertex paths.
inline TypeDensity estimate_type_density(double t, const OneWayParams& params, std::size_t R, std::size_t bins,
                                         std::uint64_t seed, std::size_t workers = 1) {
  if (bins < 10) throw RangeError("at least 10 bins are required");
  if (R < 2) throw RangeError("at least 2 replications are required");
  OneWayParams p = params;
  p.n = 1;
  p.horizon = detail::positive_horizon(t, params.horizon);
  struct Draw {
    double y;
    bool plus;
  };
  const auto draws = parallel_map<Draw>(R, workers, [&](std::size_t r) {
    const auto tr = Trajectory::one_way(p, seed, r);
    const auto& path = tr.opinion_path(0);
    return Draw{vertex_type(path, p.y0, t), path.at(t) == Opinion::plus};
  });
  TypeDensity d;
  const double width = 1.0 / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) d.bin_edges.push_back(static_cast<double>(b) * width);
  d.f_plus.assign(bins, 0.0);
  d.f_minus.assign(bins, 0.0);
  std::vector<double> is_plus(R);
  for (std::size_t k = 0; k < R; ++k) {
    const auto b = std::min(bins - 1, static_cast<std::size_t>(draws[k].y / width));
    (draws[k].plus ? d.f_plus : d.f_minus)[b] += 1.0;
    is_plus[k] = draws[k].plus ? 1.0 : 0.0;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    d.f_plus[b] /= static_cast<double>(R) * width;
    d.f_minus[b] /= static_cast<double>(R) * width;
  }
  d.mass_plus = mean_and_se(is_plus);
  return d;
}

struct GraphonCell {
  std::size_t iu = 0, iv = 0;
  double u_mid = 0.0, v_mid = 0.0;
  std::size_t count = 0;
  double empirical = 0.0;
  double graphon = 0.0;
  double std_error = 0.0;
  double allowance = 0.0;  ///< max |H - H(mid)| over the cell
  bool skipped = false;
  bool pass = true;
};

struct GraphonGrid {
  double t = 0.0;
  std::size_t grid = 0;
  std::size_t pairs = 0;
  std::vector<GraphonCell> cells;

  bool passes() const {
    return std::all_of(cells.begin(), cells.end(), [](const GraphonCell& c) { return c.skipped || c.pass; });
  }
  std::size_t checked() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const GraphonCell& c) { return !c.skipped; }));
  }
};

/// Bins R simulated vertex pairs by (y_u(t), y_v(t)) over the feasible type
/// box and compares the edge frequency per cell with H at the cell midpoint.
inline GraphonGrid graphon_grid_check(double t, const OneWayParams& params, std::size_t R, std::uint64_t seed,
                                      std::size_t grid = 10, std::size_t min_count = 100, double k = 3.0,
                                      std::size_t workers = 1) {
  if (!(t > 0.0)) throw RangeError("graphon check needs t > 0");
  OneWayParams p = params;
  p.n = 2;
  p.horizon = t;
  struct Draw {
    double yu, yv;
    bool active;
  };
  const auto draws = parallel_map<Draw>(R, workers, [&](std::size_t r) {
    auto tr = Trajectory::one_way(p, seed, r);
    return Draw{vertex_type(tr.opinion_path(0), p.y0, t), vertex_type(tr.opinion_path(1), p.y0, t),
                tr.edge_active(0, 1, t)};
  });
  const double lo = std::exp(-t) * p.y0;
  const double width = (1.0 - std::exp(-t)) / static_cast<double>(grid);
  std::vector<std::size_t> count(grid * grid, 0), hits(grid * grid, 0);
  auto bin = [&](double y) {
    const double x = (y - lo) / width;
    return std::min(grid - 1, static_cast<std::size_t>(std::max(0.0, x)));
  };
  for (const auto& d : draws) {
    const auto c = bin(d.yu) * grid + bin(d.yv);
    ++count[c];
    hits[c] += d.active ? 1 : 0;
  }
  const double slope = 0.5 * std::fabs(p.pi_plus - p.pi_minus);
  GraphonGrid out{t, grid, R, {}};
  for (std::size_t iu = 0; iu < grid; ++iu)
    for (std::size_t iv = 0; iv < grid; ++iv) {
      GraphonCell c;
      c.iu = iu;
      c.iv = iv;
      c.u_mid = lo + (static_cast<double>(iu) + 0.5) * width;
      c.v_mid = lo + (static_cast<double>(iv) + 0.5) * width;
      c.count = count[iu * grid + iv];
      c.graphon = graphon_H(t, c.u_mid, c.v_mid, p);
      c.allowance = slope * width;
      if (c.count < min_count) {
        c.skipped = true;
      } else {
        c.empirical = static_cast<double>(hits[iu * grid + iv]) / static_cast<double>(c.count);
        c.std_error = std::sqrt(c.graphon * (1.0 - c.graphon) / static_cast<double>(c.count));
        c.pass = std::fabs(c.empirical - c.graphon) <= k * c.std_error + c.allowance;
      }
      out.cells.push_back(c);
    }
  return out;
}

}  // namespace voterdyn
