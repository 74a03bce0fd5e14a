#pragma once

// Canned experiment suites. Each check returns its verdict, a plain-text
// report and the estimate records it produced. Reports and records depend
// only on the seed and the inputs, never on the worker count or the clock.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "voterdyn/config.hpp"
#include "voterdyn/counting.hpp"
#include "voterdyn/estimators.hpp"
#include "voterdyn/records.hpp"

namespace voterdyn {

inline std::string strf(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  va_list copy;
  va_copy(copy, args);
  const int len = std::vsnprintf(nullptr, 0, fmt, copy);
  va_end(copy);
  std::string out(static_cast<std::size_t>(len), '\0');
  std::vsnprintf(out.data(), out.size() + 1, fmt, args);
  va_end(args);
  return out;
}

struct CheckResult {
  int id = 0;
  std::string name;
  bool pass = true;
  std::string report;
  std::vector<EstimateRecord> records;
  double wall_time = 0.0;

  void line(const std::string& s) { report += s + "\n"; }
  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    line(std::string(ok ? "  ok   " : "  FAIL ") + what);
  }
  void record(std::string estimator, nlohmann::ordered_json parameters, const EstimateWithError& e,
              std::uint64_t seed) {
    records.push_back(EstimateRecord::from(std::move(estimator), std::move(parameters), e, seed));
  }
};

struct SuiteOptions {
  std::uint64_t seed = 20240601;
  std::size_t workers = 1;
  AcceptanceThresholds thresholds;
};

namespace detail {

inline nlohmann::ordered_json one_way_json(const OneWayParams& p) {
  return {{"n", p.n},          {"p0", p.p0},     {"gamma_mp", p.gamma_mp}, {"gamma_pm", p.gamma_pm},
          {"pi_plus", p.pi_plus}, {"pi_minus", p.pi_minus}, {"q0", p.q0}};
}

inline nlohmann::ordered_json two_way_json(const TwoWayParams& p) {
  return {{"n", p.n}, {"p0", p.p0}, {"beta", p.beta}, {"pi_plus", p.pi_plus}, {"pi_minus", p.pi_minus}, {"q0", p.q0}};
}

inline std::string pm(const EstimateWithError& e) { return strf("%.6g +/- %.2g", e.value, e.std_error); }

template <class Fn>
CheckResult timed(int id, std::string name, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r;
  r.id = id;
  r.name = std::move(name);
  fn(r);
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (auto& rec : r.records) rec.wall_time = r.wall_time;
  return r;
}

inline VoterPattern random_pattern(rng::Stream& s, std::size_t max_v) {
  const std::size_t v = 1 + s.below(max_v);
  std::vector<Opinion> ops(v);
  for (auto& o : ops) o = s.below(2) ? Opinion::plus : Opinion::minus;
  std::vector<VoterPattern::Edge> edges;
  for (std::uint32_t a = 0; a < v; ++a)
    for (std::uint32_t b = a + 1; b < v; ++b)
      if (s.uniform() < 0.5) edges.emplace_back(a, b);
  return build_pattern(ops, edges);
}

inline GraphState random_state(rng::Stream& s, std::size_t n) {
  std::vector<Opinion> ops(n);
  for (auto& o : ops) o = s.below(2) ? Opinion::plus : Opinion::minus;
  GraphState g(ops);
  const double density = 0.2 + 0.6 * s.uniform();
  for (std::uint32_t u = 0; u < n; ++u)
    for (std::uint32_t v = u + 1; v < n; ++v)
      if (s.uniform() < density) g.set_edge(u, v, true);
  return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Count simulation (the `simulate` command)

/// Count vectors at the checkpoints for either model, one row per replication.
inline CountRuns simulate_counts(const ExperimentConfig& c, std::size_t workers) {
  const auto patterns = c.parsed_patterns();
  CountRuns out{c.n, patterns, c.times, {}};
  out.runs = parallel_map<std::vector<CountVector>>(c.replications, workers, [&](std::size_t r) {
    auto tr = c.model == ModelKind::one_way ? Trajectory::one_way(c.one_way(), c.seed, r)
                                            : Trajectory::two_way(c.two_way(), c.seed, r);
    return counts_along_trajectory(tr, patterns, c.times, CountingMode::incremental);
  });
  return out;
}

inline std::string counts_csv(const CountRuns& runs) {
  std::string out = "# voterdyn-counts v1\nreplication,time,pattern,count\n";
  for (std::size_t r = 0; r < runs.runs.size(); ++r)
    for (std::size_t p = 0; p < runs.times.size(); ++p)
      for (std::size_t i = 0; i < runs.patterns.size(); ++i)
        out += std::to_string(r) + ',' + format_double(runs.times[p]) + ',' + csv_quote(to_literal(runs.patterns[i])) +
               ',' + std::to_string(runs.runs[r][p].values[i]) + '\n';
  return out;
}

inline CheckResult summarize_counts(const ExperimentConfig& c, const CountRuns& runs) {
  return detail::timed(0, "simulate", [&](CheckResult& res) {
    res.line(strf("model=%s n=%zu replications=%zu seed=%llu", c.model == ModelKind::one_way ? "one_way" : "two_way",
                  c.n, runs.runs.size(), static_cast<unsigned long long>(c.seed)));
    for (std::size_t p = 0; p < runs.times.size(); ++p)
      for (std::size_t i = 0; i < runs.patterns.size(); ++i) {
        const auto lit = to_literal(runs.patterns[i]);
        const auto series = runs.series(p, i);
        nlohmann::ordered_json par{{"pattern", lit}, {"t", runs.times[p]}, {"n", c.n}};
        if (series.size() >= 2) {
          const auto e = mean_and_se(series);
          res.record("mean_count", par, e, c.seed);
          res.line(strf("t=%-6g %-36s mean count %s", runs.times[p], lit.c_str(), detail::pm(e).c_str()));
        } else {
          res.record("count", par, {series.front(), 0.0, 1}, c.seed);
          res.line(strf("t=%-6g %-36s count %.0f", runs.times[p], lit.c_str(), series.front()));
        }
      }
  });
}

// ---------------------------------------------------------------------------
// FCLT bundle: standardization, normality, covariance targets, Wick moments

struct FcltOutcome {
  CheckResult gaussian;  ///< moments, QQ and entrywise covariance
  CheckResult wick;
};

inline FcltOutcome fclt_bundle(const OneWayParams& params, const std::vector<VoterPattern>& patterns,
                               const std::vector<double>& times, std::size_t R, const SuiteOptions& opt,
                               int gaussian_id = 5, int wick_id = 6) {
  const auto& thr = opt.thresholds;
  const double k = thr.k_se;
  const auto start = std::chrono::steady_clock::now();
  const auto runs = simulate_one_way_counts(params, patterns, times, R, rng::derive_key(opt.seed, {1}), opt.workers);
  const auto z = standardize(runs, params);
  const auto target = estimate_target_covariance(patterns, times, params, thr.target_replications,
                                                 rng::derive_key(opt.seed, {2}), opt.workers);
  const auto base = detail::one_way_json(params);
  const std::size_t d = z.dimension();
  auto coord_name = [&](std::size_t a) {
    return strf("%s@t=%g", to_literal(patterns[a % patterns.size()]).c_str(), times[a / patterns.size()]);
  };

  FcltOutcome out;
  CheckResult& g = out.gaussian;
  g.id = gaussian_id;
  g.name = "Gaussianity of standardized counts";
  g.line(strf("n=%zu R=%zu centering=%s; targets from estimate_C with R=%zu", params.n, R,
              z.centering == Centering::analytic ? "exact mean" : "sample mean", thr.target_replications));
  const auto diag = normality_diagnostics(z.rows, target.values(), 200, rng::derive_key(opt.seed, {3}));
  for (std::size_t a = 0; a < d; ++a) {
    const auto& c = diag.coordinates[a];
    auto par = base;
    par["coordinate"] = coord_name(a);
    g.record("normality.skewness", par, {c.skewness, c.skewness_se, R}, opt.seed);
    g.record("normality.excess_kurtosis", par, {c.excess_kurtosis, c.kurtosis_se, R}, opt.seed);
    g.record("normality.qq_correlation", par, {c.qq_correlation, 0.0, R}, opt.seed);
    g.require(!c.degenerate, coord_name(a) + " is not degenerate");
    g.require(std::fabs(c.skewness) < k * c.skewness_se,
              strf("%s skewness %.4f, bound %.4f", coord_name(a).c_str(), c.skewness, k * c.skewness_se));
    g.require(std::fabs(c.excess_kurtosis) < k * c.kurtosis_se,
              strf("%s excess kurtosis %.4f, bound %.4f", coord_name(a).c_str(), c.excess_kurtosis,
                   k * c.kurtosis_se));
    g.require(c.qq_correlation > thr.qq_min,
              strf("%s QQ correlation %.5f > %.3f", coord_name(a).c_str(), c.qq_correlation, thr.qq_min));
  }
  const auto sample = covariance_matrix(z.rows);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      const EstimateWithError s{sample(a, b), sample.se(a, b), R};
      const auto& t = target(a, b);
      auto par = base;
      par["a"] = coord_name(a);
      par["b"] = coord_name(b);
      g.record("sample_covariance", par, s, opt.seed);
      g.record("estimate_C", par, t, rng::derive_key(opt.seed, {2}));
      const double se = combined_se(s, t);
      const auto& h = patterns[a % patterns.size()];
      if (a == b && h.vertex_count() == 2 && h.edge_count() == 1) {
        const double ph = *analytic_P(h, times[a / patterns.size()], params);
        g.line(strf("  info exact finite-n variance of %s at n=%zu given the target: %.6g", coord_name(a).c_str(),
                    params.n, finite_n_scaled_edge_variance(params.n, h, ph, t.value)));
      }
      g.require(std::fabs(s.value - t.value) < k * se,
                strf("cov[%s, %s]: sample %s vs target %s (%.2f SE)", coord_name(a).c_str(), coord_name(b).c_str(),
                     detail::pm(s).c_str(), detail::pm(t).c_str(), std::fabs(s.value - t.value) / se));
    }
  if (diag.covariance_distance)
    g.line(strf("  Frobenius distance to targets %.4g (bootstrap SE %.2g)", *diag.covariance_distance,
                *diag.covariance_distance_se));

  CheckResult& w = out.wick;
  w.id = wick_id;
  w.name = "Wick moments";
  std::vector<double> weights = thr.weights.empty() ? std::vector<double>(d, 1.0) : thr.weights;
  if (weights.size() != d) throw ConfigError("acceptance.weights must have " + std::to_string(d) + " entries");
  const auto sigma2 = assemble_sigma2(target, weights);
  const auto moments = wick_moments(z, weights, 4, sigma2, thr.bootstrap_draws, rng::derive_key(opt.seed, {4}));
  w.line(strf("weights=(%s) sigma^2=%s", detail::join(weights).c_str(), detail::pm(sigma2).c_str()));
  auto par = base;
  par["weights"] = weights;
  w.record("wick.sigma2", par, sigma2, rng::derive_key(opt.seed, {2}));
  for (const auto& m : moments) {
    auto mp = par;
    mp["z"] = m.z;
    mp["target"] = m.target;
    w.record("wick.moment", mp, {m.moment.value, m.combined_se(), R}, opt.seed);
    const std::string text =
        strf("E[xi^%d] = %s, target %.6g (%.2f SE)", m.z, detail::pm(m.moment).c_str(), m.target,
             std::fabs(m.moment.value - m.target) / m.combined_se());
    if (m.z == 3 || m.z == 4)
      w.require(m.consistent(k), text);
    else
      w.line("  info " + text);
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  g.wall_time = w.wall_time = elapsed;
  return out;
}

/// Covariance targets against the closed form when π₊ = π₋.
inline CheckResult opinion_free_cross_check(const OneWayParams& params, const std::vector<VoterPattern>& patterns,
                                            const std::vector<double>& times, const SuiteOptions& opt) {
  return detail::timed(0, "closed-form covariance cross-check", [&](CheckResult& res) {
    const auto target = estimate_target_covariance(patterns, times, params, opt.thresholds.target_replications,
                                                   rng::derive_key(opt.seed, {2}), opt.workers);
    const std::size_t m = patterns.size();
    for (std::size_t a = 0; a < target.dim; ++a)
      for (std::size_t b = a; b < target.dim; ++b) {
        const std::size_t pa = a / m, ia = a % m, pb = b / m, ib = b % m;
        const auto exact = times[pa] <= times[pb]
                               ? analytic_C_opinion_free(patterns[ia], patterns[ib], times[pa], times[pb], params)
                               : analytic_C_opinion_free(patterns[ib], patterns[ia], times[pb], times[pa], params);
        auto par = detail::one_way_json(params);
        par["a"] = a;
        par["b"] = b;
        res.record("analytic_C", par, {*exact, 0.0, 0}, opt.seed);
        res.require(target(a, b).within(*exact, opt.thresholds.k_se),
                    strf("C[%zu,%zu]: estimate %s vs closed form %.6g", a, b, detail::pm(target(a, b)).c_str(), *exact));
      }
  });
}

inline CheckResult tightness_suite(const OneWayParams& params, const VoterPattern& hi, const VoterPattern& hj,
                                   double t_max, std::size_t triples, std::size_t R, const SuiteOptions& opt,
                                   int id = 10) {
  return detail::timed(id, "tightness bound", [&](CheckResult& res) {
    rng::Stream s(rng::derive_key(opt.seed, {10}));
    for (std::size_t k = 0; k < triples; ++k) {
      double x[3] = {t_max * s.uniform(), t_max * s.uniform(), t_max * s.uniform()};
      std::sort(x, x + 3);
      const auto tr =
          tightness_check(params.n, hi, hj, x[0], x[1], x[2], params, R, rng::derive_key(opt.seed, {11, k}), opt.workers);
      auto par = detail::one_way_json(params);
      par["r"] = x[0];
      par["s"] = x[1];
      par["t"] = x[2];
      par["bound"] = tr.rhs;
      res.record("tightness.delta", par, tr.lhs, rng::derive_key(opt.seed, {11, k}));
      res.require(tr.holds(opt.thresholds.k_se), strf("(r,s,t)=(%.3f,%.3f,%.3f): Delta %s <= bound %.4g", x[0], x[1],
                                                      x[2], detail::pm(tr.lhs).c_str(), tr.rhs));
    }
  });
}

// ---------------------------------------------------------------------------
// Two-way table

struct PublishedCell {
  std::size_t n;
  double t;
  double cprime;
  double c3;
};

inline const std::vector<PublishedCell>& published_table() {
  static const std::vector<PublishedCell> table{{100, 1, 0.1545, 0.0068}, {100, 2, 0.1675, 0.0109},
                                                {100, 4, 0.1565, 0.0145}, {200, 1, 0.1565, 0.0013},
                                                {200, 2, 0.1485, 0.0020}, {200, 4, 0.1415, 0.0025}};
  return table;
}

inline std::optional<PublishedCell> published_cell(std::size_t n, double t) {
  for (const auto& c : published_table())
    if (c.n == n && c.t == t) return c;
  return std::nullopt;
}

/// Estimates C' and C^(z) at every (n, t) with both normalizations, and
/// checks positivity of the raw covariance, the decay of C^(z) in n and the
/// |C'| <= 1/(4 A^2) bound of the normalized values.
inline CheckResult two_way_table(const TwoWayParams& params, const VoterPattern& h, const std::vector<std::size_t>& ns,
                                 const std::vector<double>& times, int z, std::size_t R, const SuiteOptions& opt,
                                 int id = 11) {
  return detail::timed(id, "two-way table", [&](CheckResult& res) {
    const double k = opt.thresholds.k_se;
    const double a = static_cast<double>(automorphism_count(h));
    const bool exchangeable = h.vertex_count() == 2 && h.edge_count() == 1;
    res.line(strf("pattern %s, A(H)=%.0f, R=%zu, z=%d; exchangeable estimator %s", to_literal(h).c_str(), a, R, z,
                  exchangeable ? "on" : "off (pattern is not a single edge)"));
    res.line("columns: n t | C' = Cov/A^2 | raw Cov | n*Cov | Var(X)/n^(2V-1) | C^(z) | C^(z) fixed | published C' C^(3)");
    std::vector<std::vector<double>> cz_abs(ns.size());
    bool bound_ok = true;
    std::vector<std::string> scale_notes;
    for (std::size_t in = 0; in < ns.size(); ++in) {
      const std::size_t n = ns[in];
      const auto samples = simulate_two_way_samples(n, h, times, z, params, R, rng::derive_key(opt.seed, {n}), opt.workers);
      for (std::size_t it = 0; it < times.size(); ++it) {
        const double t = times[it];
        auto par = detail::two_way_json(params);
        par["n"] = n;
        par["t"] = t;
        par["pattern"] = to_literal(h);
        const auto fixed = cprime_from_samples(samples, it, h);
        const auto fixed_z = cz_from_samples(samples, it, z, h);
        CprimeEstimate cp = fixed;
        EstimateWithError cz = fixed_z.value;
        EstimateWithError var_scaled{};
        if (exchangeable) {
          const auto ex = exchangeable_from_samples(samples, it, h);
          cp = ex.cprime;
          if (z == 3) cz = ex.c3.value;
          const double n1 = detail::falling(n, 2) / a;
          std::vector<double> x(R);
          for (std::size_t r = 0; r < R; ++r) x[r] = samples[r][it].a1 * n1;
          const double scale = std::pow(static_cast<double>(n), 2.0 * static_cast<double>(h.vertex_count()) - 1.0);
          const double var = sample_variance(x);
          std::vector<double> dev(R);
          const double mx = mean(x);
          for (std::size_t r = 0; r < R; ++r) dev[r] = (x[r] - mx) * (x[r] - mx);
          var_scaled = {var / scale, std::sqrt(sample_variance(dev) / static_cast<double>(R)) / scale, R};
          res.record("var_count_scaled", par, var_scaled, rng::derive_key(opt.seed, {n}));
        }
        const EstimateWithError n_cov{cp.raw.value * static_cast<double>(n), cp.raw.std_error * static_cast<double>(n), R};
        res.record("cprime.normalized", par, cp.normalized, rng::derive_key(opt.seed, {n}));
        res.record("cprime.raw", par, cp.raw, rng::derive_key(opt.seed, {n}));
        res.record("cprime.fixed_raw", par, fixed.raw, rng::derive_key(opt.seed, {n}));
        auto zpar = par;
        zpar["z"] = z;
        res.record("cz", zpar, cz, rng::derive_key(opt.seed, {n}));
        res.record("cz.fixed", zpar, fixed_z.value, rng::derive_key(opt.seed, {n}));
        cz_abs[in].push_back(std::fabs(cz.value));
        const auto pub = published_cell(n, t);
        res.line(strf("%4zu %3g | %s | %s | %s | %s | %s | %s | %s", n, t, detail::pm(cp.normalized).c_str(),
                      detail::pm(cp.raw).c_str(), detail::pm(n_cov).c_str(), detail::pm(var_scaled).c_str(),
                      detail::pm(cz).c_str(), detail::pm(fixed_z.value).c_str(),
                      pub ? strf("%.4f %.4f", pub->cprime, pub->c3).c_str() : "-"));
        res.require(cp.raw.value - k * cp.raw.std_error > 0.0,
                    strf("n=%zu t=%g raw Cov %s is positive with %g SE separation", n, t, detail::pm(cp.raw).c_str(), k));
        const double bound = 0.25 / (a * a);
        bound_ok = bound_ok && std::fabs(cp.normalized.value) <= bound;
        if (pub && exchangeable)
          scale_notes.push_back(strf("n=%zu t=%g: published %.4f, Cov/A^2 %.5f, n*Cov %.4f, Var(X)/n^3 %.4f", n, t,
                                     pub->cprime, cp.normalized.value, n_cov.value, var_scaled.value));
      }
    }
    for (std::size_t in = 1; in < ns.size(); ++in)
      for (std::size_t it = 0; it < times.size(); ++it)
        res.require(cz_abs[in][it] < cz_abs[in - 1][it],
                    strf("|C^(%d)| at n=%zu (%.3g) below n=%zu (%.3g) at t=%g", z, ns[in], cz_abs[in][it], ns[in - 1],
                         cz_abs[in - 1][it], times[it]));
    res.require(bound_ok, strf("every Cov/A^2 estimate lies within the bound 1/(4 A^2) = %.4f", 0.25 / (a * a)));
    if (!scale_notes.empty()) {
      res.line("normalization:");
      res.line(strf("  published C' values reach %.4f, above the bound 1/(4 A^2) = %.4f, so they cannot be Cov/A^2;",
                    0.1675, 0.25 / (a * a)));
      res.line("  the raw covariance respects its bound 1/4 but is two orders of magnitude smaller.");
      res.line("  n*Cov (the leading term of Var(X_n)/n^(2V-1) in the two-way model) and Var(X_n)/n^3 have");
      res.line("  the published order of magnitude at t=1 and are stable in n like the published values,");
      res.line("  but they grow with t while the published values stay near 0.15. No normalization");
      res.line("  reproduces the table; the per-cell comparison follows.");
      for (const auto& s : scale_notes) res.line("  " + s);
    }
  });
}

// ---------------------------------------------------------------------------
// Graphon grid

inline std::string graphon_csv(const GraphonGrid& g) {
  std::string out = "# voterdyn-graphon v1\niu,iv,u_mid,v_mid,count,empirical,graphon,z,skipped\n";
  for (const auto& c : g.cells) {
    const double z = c.skipped || c.std_error == 0.0 ? 0.0 : std::fabs(c.empirical - c.graphon) / c.std_error;
    out += strf("%zu,%zu,", c.iu, c.iv) + format_double(c.u_mid) + ',' + format_double(c.v_mid) + ',' +
           std::to_string(c.count) + ',' + format_double(c.empirical) + ',' + format_double(c.graphon) + ',' +
           format_double(z) + ',' + (c.skipped ? "1" : "0") + '\n';
  }
  return out;
}

inline CheckResult graphon_report(const GraphonGrid& g, const OneWayParams& params, std::size_t min_count,
                                  std::uint64_t seed, int id = 9) {
  return detail::timed(id, "graphon consistency", [&](CheckResult& res) {
    res.line(strf("t=%g grid=%zux%zu pairs=%zu; cells with < %zu samples skipped", g.t, g.grid, g.grid, g.pairs,
                  min_count));
    std::size_t failed = 0, skipped = 0;
    double worst = 0.0;
    for (const auto& c : g.cells) {
      if (c.skipped) {
        ++skipped;
        continue;
      }
      if (!c.pass) ++failed;
      const double excess = std::fabs(c.empirical - c.graphon) - c.allowance;
      worst = std::max(worst, c.std_error > 0.0 ? excess / c.std_error : 0.0);
      auto par = detail::one_way_json(params);
      par["t"] = g.t;
      par["iu"] = c.iu;
      par["iv"] = c.iv;
      par["graphon"] = c.graphon;
      res.record("graphon.cell", par, {c.empirical, c.std_error, c.count}, seed);
    }
    res.line(strf("checked %zu cells, skipped %zu, worst (|diff| - allowance)/SE = %.2f", g.checked(), skipped, worst));
    res.require(failed == 0, strf("%zu checked cells outside tolerance", failed));
  });
}

// ---------------------------------------------------------------------------
// The acceptance criteria

inline CheckResult criterion_exact_counts(const SuiteOptions& opt) {
  return detail::timed(1, "exact-count oracle", [&](CheckResult& res) {
    rng::Stream s(rng::derive_key(opt.seed, {100}));
    std::size_t mismatches = 0;
    for (int k = 0; k < 1000; ++k) {
      const std::size_t n = 1 + s.below(10);
      const auto g = detail::random_state(s, n);
      const auto h = detail::random_pattern(s, 4);
      if (count_pattern(g, h) != count_bruteforce(g, h)) ++mismatches;
    }
    res.record("count_oracle.mismatches", {{"states", 1000}, {"max_n", 10}, {"max_v", 4}},
               {static_cast<double>(mismatches), 0.0, 1000}, opt.seed);
    res.require(mismatches == 0, strf("backtracking vs brute force on 1000 random states: %zu mismatches", mismatches));

    const std::vector<VoterPattern> patterns{
        edge_pattern(Opinion::plus, Opinion::plus), edge_pattern(Opinion::plus, Opinion::minus),
        triangle_pattern(Opinion::plus, Opinion::plus, Opinion::minus),
        path3_pattern(Opinion::minus, Opinion::plus, Opinion::minus),
        build_pattern({Opinion::plus, Opinion::plus, Opinion::minus, Opinion::minus}, {{0, 1}, {0, 2}, {0, 3}})};
    auto p = standard_one_way_params(30, 1.0);
    std::size_t checked = 0, bad = 0;
    for (std::uint64_t r = 0; r < 20; ++r) {
      auto tr = Trajectory::one_way(p, rng::derive_key(opt.seed, {101}), r);
      auto events = tr.events(0.0, p.horizon);
      if (events.size() < 50) throw ConsistencyError("trajectory has fewer than 50 events");
      events.resize(50);
      IncrementalCounter counter(tr.state(0.0), patterns);
      for (const auto& e : events) {
        counter.apply(e);
        const auto inc = counter.counts();
        for (std::size_t i = 0; i < patterns.size(); ++i) {
          ++checked;
          if (inc[i] != count_pattern(counter.state(), patterns[i])) ++bad;
        }
      }
    }
    res.record("incremental.mismatches", {{"trajectories", 20}, {"events", 50}, {"n", 30}},
               {static_cast<double>(bad), 0.0, checked}, opt.seed);
    res.require(bad == 0, strf("incremental vs recount after each of 50 events, 20 trajectories at n=30: %zu of %zu "
                               "comparisons differ",
                               bad, checked));
  });
}

inline CheckResult criterion_expectation(const SuiteOptions& opt) {
  return detail::timed(2, "exact expectation", [&](CheckResult& res) {
    const auto h = edge_pattern(Opinion::plus, Opinion::plus);
    const std::vector<double> times{0.5, 1.0, 2.0};
    auto p = standard_one_way_params(50, 2.0);
    const std::uint64_t seed = rng::derive_key(opt.seed, {200});
    const auto runs = simulate_one_way_counts(p, {h}, times, 10000, seed, opt.workers);
    for (std::size_t it = 0; it < times.size(); ++it) {
      const auto e = mean_and_se(runs.series(it, 0));
      const double exact = expected_count(50, h, analytic_P_edge(times[it], Opinion::plus, Opinion::plus, p));
      auto par = detail::one_way_json(p);
      par["t"] = times[it];
      par["expected"] = exact;
      res.record("mean_count", par, e, seed);
      res.require(e.within(exact, opt.thresholds.k_se), strf("t=%g: mean count %s vs n!P/((n-2)! 2) = %.4f (%.2f SE)",
                                                             times[it], detail::pm(e).c_str(), exact,
                                                             std::fabs(e.value - exact) / e.std_error));
    }
  });
}

inline CheckResult criterion_probability_chain(const SuiteOptions& opt) {
  return detail::timed(3, "edge-probability oracle chain", [&](CheckResult& res) {
    const double k = opt.thresholds.k_se;
    rng::Stream s(rng::derive_key(opt.seed, {300}));
    for (std::uint64_t set = 0; set < 10; ++set) {
      OneWayParams p;
      p.n = 2;
      p.p0 = s.uniform();
      p.gamma_mp = 2.0 * s.uniform();
      p.gamma_pm = 2.0 * s.uniform();
      p.pi_plus = s.uniform();
      p.pi_minus = s.uniform();
      p.q0 = s.uniform();
      const double t = 0.2 + 2.0 * s.uniform();
      const Opinion o1 = s.below(2) ? Opinion::plus : Opinion::minus;
      const Opinion o2 = s.below(2) ? Opinion::plus : Opinion::minus;
      const auto h = edge_pattern(o1, o2);
      const double exact = analytic_P_edge(t, o1, o2, p);
      const auto mc = mc_estimate_P(h, t, p, 100000, rng::derive_key(opt.seed, {301, set}), opt.workers);
      const auto rb = rb_estimate_P(h, t, p, 100000, rng::derive_key(opt.seed, {302, set}), opt.workers);
      auto par = detail::one_way_json(p);
      par["t"] = t;
      par["pattern"] = to_literal(h);
      res.record("analytic_P_edge", par, {exact, 0.0, 0}, 0);
      res.record("mc_estimate_P", par, mc, rng::derive_key(opt.seed, {301, set}));
      res.record("rb_estimate_P", par, rb, rng::derive_key(opt.seed, {302, set}));
      const bool ok = mc.within(exact, k) && rb.within(exact, k) && std::fabs(mc.value - rb.value) <= k * combined_se(mc, rb);
      res.require(ok, strf("set %llu (%s, t=%.3f): analytic %.6f, mc %s, rb %s", static_cast<unsigned long long>(set),
                           to_literal(h).c_str(), t, exact, detail::pm(mc).c_str(), detail::pm(rb).c_str()));
    }
  });
}

inline CheckResult criterion_covariance_scaling(const SuiteOptions& opt) {
  return detail::timed(4, "covariance scaling", [&](CheckResult& res) {
    const double k = opt.thresholds.k_se;
    const auto h = edge_pattern(Opinion::plus, Opinion::plus);
    const auto p = standard_one_way_params(2, 1.0);
    const std::uint64_t cseed = rng::derive_key(opt.seed, {400});
    const auto c = estimate_C(h, h, 1.0, 1.0, p, opt.thresholds.target_replications, cseed,
                              CovarianceMethod::rao_blackwell, Placement::shared_vertex, opt.workers);
    res.record("estimate_C", detail::one_way_json(p), c, cseed);
    res.line(strf("estimate_C (minimal system) = %s", detail::pm(c).c_str()));
    const double ph = analytic_P_edge(1.0, Opinion::plus, Opinion::plus, p);
    std::vector<EstimateWithError> scaled;
    for (std::size_t n : {25, 50, 100}) {
      const auto seed = rng::derive_key(opt.seed, {401, n});
      const auto e = estimate_full_covariance(n, h, h, 1.0, 1.0, p, 20000, seed, opt.workers);
      auto par = detail::one_way_json(p);
      par["n"] = n;
      res.record("scaled_covariance", par, e.scaled, seed);
      scaled.push_back(e.scaled);
      const double exact_n = finite_n_scaled_edge_variance(n, h, ph, c.value);
      res.require(std::fabs(e.scaled.value - c.value) <= k * combined_se(e.scaled, c),
                  strf("n=%zu: Var(X)/n^3 = %s vs C %.5f (%.2f SE); finite-n formula predicts %.5f", n,
                       detail::pm(e.scaled).c_str(), c.value, std::fabs(e.scaled.value - c.value) / combined_se(e.scaled, c),
                       exact_n));
    }
    for (std::size_t i = 0; i < scaled.size(); ++i)
      for (std::size_t j = i + 1; j < scaled.size(); ++j)
        res.require(std::fabs(scaled[i].value - scaled[j].value) <= k * combined_se(scaled[i], scaled[j]),
                    strf("scaled covariances %zu vs %zu agree (%.2f SE)", i, j,
                         std::fabs(scaled[i].value - scaled[j].value) / combined_se(scaled[i], scaled[j])));
  });
}

inline std::vector<CheckResult> criteria_gaussian_and_wick(const SuiteOptions& opt) {
  const auto p = standard_one_way_params(100, 2.0);
  SuiteOptions o = opt;
  o.seed = rng::derive_key(opt.seed, {500});
  auto out = fclt_bundle(p, {edge_pattern(Opinion::plus, Opinion::plus), edge_pattern(Opinion::plus, Opinion::minus)},
                         {1.0, 2.0}, 2000, o);
  return {out.gaussian, out.wick};
}

inline CheckResult criterion_positivity(const SuiteOptions& opt) {
  return detail::timed(7, "positivity", [&](CheckResult& res) {
    const auto h = edge_pattern(Opinion::plus, Opinion::plus);
    const auto p = standard_one_way_params(3, 1.0);
    const auto seed = rng::derive_key(opt.seed, {700});
    const auto c = estimate_C(h, h, 1.0, 1.0, p, 100000, seed, CovarianceMethod::rao_blackwell,
                              Placement::shared_vertex, opt.workers);
    res.record("estimate_C", detail::one_way_json(p), c, seed);
    res.require(c.value - opt.thresholds.k_se * c.std_error > 0.0,
                strf("C(1,1) = %s, lower %g-SE limit %.6f", detail::pm(c).c_str(), opt.thresholds.k_se,
                     c.value - opt.thresholds.k_se * c.std_error));
  });
}

inline CheckResult criterion_independence(const SuiteOptions& opt) {
  return detail::timed(8, "one-way independence", [&](CheckResult& res) {
    const auto h = edge_pattern(Opinion::plus, Opinion::plus);
    const auto p = standard_one_way_params(4, 1.0);
    const auto seed = rng::derive_key(opt.seed, {800});
    const auto c =
        estimate_C(h, h, 1.0, 1.0, p, 100000, seed, CovarianceMethod::naive, Placement::disjoint, opt.workers);
    res.record("estimate_C.disjoint", detail::one_way_json(p), c, seed);
    res.require(c.within(0.0, opt.thresholds.k_se),
                strf("disjoint-placement covariance %s (%.2f SE from 0)", detail::pm(c).c_str(),
                     std::fabs(c.value) / c.std_error));
  });
}

inline CheckResult criterion_graphon(const SuiteOptions& opt) {
  const auto p = standard_one_way_params(2, 1.0);
  const auto seed = rng::derive_key(opt.seed, {900});
  const auto g = graphon_grid_check(1.0, p, 100000, seed, 10, 100, opt.thresholds.k_se, opt.workers);
  return graphon_report(g, p, 100, seed, 9);
}

inline CheckResult criterion_tightness(const SuiteOptions& opt) {
  SuiteOptions o = opt;
  o.seed = rng::derive_key(opt.seed, {1000});
  return tightness_suite(standard_one_way_params(50, 2.0), edge_pattern(Opinion::plus, Opinion::plus),
                         edge_pattern(Opinion::plus, Opinion::minus), 2.0, 10, 5000, o, 10);
}

inline CheckResult criterion_two_way_table(const SuiteOptions& opt) {
  SuiteOptions o = opt;
  o.seed = rng::derive_key(opt.seed, {1100});
  return two_way_table(table_two_way_params(100, 4.0), edge_pattern(Opinion::plus, Opinion::plus), {100, 200},
                       {1.0, 2.0, 4.0}, 3, 10000, o, 11);
}

/// Criteria 1 to 11 in order.
inline std::vector<CheckResult> acceptance_suite(const SuiteOptions& opt, const std::vector<int>& only = {}) {
  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  std::vector<CheckResult> out;
  if (wanted(1)) out.push_back(criterion_exact_counts(opt));
  if (wanted(2)) out.push_back(criterion_expectation(opt));
  if (wanted(3)) out.push_back(criterion_probability_chain(opt));
  if (wanted(4)) out.push_back(criterion_covariance_scaling(opt));
  if (wanted(5) || wanted(6))
    for (auto& r : criteria_gaussian_and_wick(opt))
      if (wanted(r.id)) out.push_back(std::move(r));
  if (wanted(7)) out.push_back(criterion_positivity(opt));
  if (wanted(8)) out.push_back(criterion_independence(opt));
  if (wanted(9)) out.push_back(criterion_graphon(opt));
  if (wanted(10)) out.push_back(criterion_tightness(opt));
  if (wanted(11)) out.push_back(criterion_two_way_table(opt));
  return out;
}

}  // namespace voterdyn
