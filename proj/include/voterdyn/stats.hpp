#pragma once

// Monte Carlo summaries: means with standard errors, covariance matrices with
// delta-method standard errors, and moment / quantile diagnostics of
// Gaussianity. Sums use pairwise (cascade) summation in a fixed order so the
// results depend only on the input ordering.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "voterdyn/errors.hpp"
#include "voterdyn/rng.hpp"

namespace voterdyn {

struct EstimateWithError {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t replications = 0;

  /// |value - target| <= k * SE (plus an absolute slack for exact targets).
  bool within(double target, double k = 3.0, double slack = 0.0) const {
    return std::fabs(value - target) <= k * std_error + slack;
  }
};

/// Combined standard error of a difference of independent estimates.
inline double combined_se(const EstimateWithError& a, const EstimateWithError& b) {
  return std::hypot(a.std_error, b.std_error);
}

inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 16) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

inline double mean(std::span<const double> x) {
  if (x.empty()) throw RangeError("mean of an empty sample");
  return pairwise_sum(x) / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw RangeError("variance needs at least 2 samples");
  const double m = mean(x);
  std::vector<double> sq(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - m) * (x[i] - m);
  return pairwise_sum(sq) / static_cast<double>(x.size() - 1);
}

inline EstimateWithError mean_and_se(std::span<const double> x) {
  if (x.size() < 2) throw RangeError("mean_and_se needs at least 2 samples");
  const double var = sample_variance(x);
  return {mean(x), std::sqrt(var / static_cast<double>(x.size())), x.size()};
}

/// Unbiased covariance of paired samples. The SE is the delta-method one:
/// the sample SD of the influence values (x_k - x̄)(y_k - ȳ) over sqrt(R).
inline EstimateWithError covariance_estimate(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw RangeError("covariance of samples with different lengths");
  if (x.size() < 2) throw RangeError("covariance needs at least 2 samples");
  const double mx = mean(x);
  const double my = mean(y);
  const std::size_t r = x.size();
  std::vector<double> prod(r);
  for (std::size_t k = 0; k < r; ++k) prod[k] = (x[k] - mx) * (y[k] - my);
  const double cov = pairwise_sum(prod) / static_cast<double>(r - 1);
  const double se = std::sqrt(sample_variance(prod) / static_cast<double>(r));
  return {cov, se, r};
}

/// Dense symmetric matrix with per-entry standard errors.
struct CovarianceMatrix {
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<double> std_errors;
  std::size_t replications = 0;

  double operator()(std::size_t i, std::size_t j) const { return values.at(i * dim + j); }
  double se(std::size_t i, std::size_t j) const { return std_errors.at(i * dim + j); }
};

/// Sample covariance of R vectors (rows) of equal dimension.
inline CovarianceMatrix covariance_matrix(const std::vector<std::vector<double>>& samples) {
  if (samples.size() < 2) throw RangeError("covariance matrix needs at least 2 samples");
  const std::size_t d = samples.front().size();
  for (const auto& row : samples)
    if (row.size() != d) throw RangeError("samples have mismatched dimensions");
  std::vector<std::vector<double>> cols(d, std::vector<double>(samples.size()));
  for (std::size_t k = 0; k < samples.size(); ++k)
    for (std::size_t i = 0; i < d; ++i) cols[i][k] = samples[k][i];
  CovarianceMatrix m{d, std::vector<double>(d * d), std::vector<double>(d * d), samples.size()};
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      const auto e = covariance_estimate(cols[i], cols[j]);
      m.values[i * d + j] = m.values[j * d + i] = e.value;
      m.std_errors[i * d + j] = m.std_errors[j * d + i] = e.std_error;
    }
  return m;
}

/// Normal quantile of Blom plotting positions (i - 3/8) / (R + 1/4).
inline std::vector<double> normal_scores(std::size_t r) {
  const boost::math::normal_distribution<double> normal;
  std::vector<double> z(r);
  for (std::size_t i = 0; i < r; ++i)
    z[i] = boost::math::quantile(normal, (static_cast<double>(i + 1) - 0.375) / (static_cast<double>(r) + 0.25));
  return z;
}

struct CoordinateDiagnostics {
  double skewness = 0.0;
  double skewness_se = 0.0;
  double excess_kurtosis = 0.0;
  double kurtosis_se = 0.0;
  double omnibus = 0.0;  ///< R/6 (S^2 + K^2/4)
  double qq_correlation = 0.0;
  bool degenerate = false;
};

struct NormalityReport {
  std::size_t replications = 0;
  std::vector<CoordinateDiagnostics> coordinates;
  std::optional<double> covariance_distance;  ///< Frobenius distance to the target
  std::optional<double> covariance_distance_se;
  bool degenerate = false;

  /// |skew| < k sqrt(6/R), |kurt| < k sqrt(24/R), QQ correlation > qq_min.
  bool passes(double k = 3.0, double qq_min = 0.99) const {
    for (const auto& c : coordinates) {
      if (c.degenerate) return false;
      if (std::fabs(c.skewness) >= k * c.skewness_se) return false;
      if (std::fabs(c.excess_kurtosis) >= k * c.kurtosis_se) return false;
      if (c.qq_correlation <= qq_min) return false;
    }
    return true;
  }
};

inline CoordinateDiagnostics diagnose_coordinate(std::span<const double> x, const std::vector<double>& scores) {
  const std::size_t r = x.size();
  CoordinateDiagnostics c;
  c.skewness_se = std::sqrt(6.0 / static_cast<double>(r));
  c.kurtosis_se = std::sqrt(24.0 / static_cast<double>(r));
  const double m = mean(x);
  std::vector<double> d2(r), d3(r), d4(r);
  for (std::size_t k = 0; k < r; ++k) {
    const double d = x[k] - m;
    d2[k] = d * d;
    d3[k] = d2[k] * d;
    d4[k] = d2[k] * d2[k];
  }
  const double m2 = pairwise_sum(d2) / static_cast<double>(r);
  if (!(m2 > 0.0) || m2 <= 1e-300) {
    c.degenerate = true;
    return c;
  }
  const double m3 = pairwise_sum(d3) / static_cast<double>(r);
  const double m4 = pairwise_sum(d4) / static_cast<double>(r);
  c.skewness = m3 / std::pow(m2, 1.5);
  c.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  c.omnibus = static_cast<double>(r) / 6.0 * (c.skewness * c.skewness + 0.25 * c.excess_kurtosis * c.excess_kurtosis);

  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double zm = mean(scores);
  std::vector<double> sxz(r), szz(r), sxx(r);
  for (std::size_t k = 0; k < r; ++k) {
    sxz[k] = (sorted[k] - m) * (scores[k] - zm);
    szz[k] = (scores[k] - zm) * (scores[k] - zm);
    sxx[k] = (sorted[k] - m) * (sorted[k] - m);
  }
  const double corr = pairwise_sum(sxz) / std::sqrt(pairwise_sum(szz) * pairwise_sum(sxx));
  c.qq_correlation = std::clamp(corr, -1.0, 1.0);
  return c;
}

inline double frobenius_distance(const CovarianceMatrix& m, std::span<const double> target) {
  double acc = 0.0;
  for (std::size_t k = 0; k < m.values.size(); ++k) acc += (m.values[k] - target[k]) * (m.values[k] - target[k]);
  return std::sqrt(acc);
}

/// Per-coordinate moment and QQ diagnostics. With a target covariance
/// (row-major d x d), also the Frobenius distance of the sample covariance
/// to it, with a bootstrap SE from `bootstrap_draws` resamples.
inline NormalityReport normality_diagnostics(const std::vector<std::vector<double>>& samples,
                                             std::optional<std::vector<double>> target_cov = std::nullopt,
                                             std::size_t bootstrap_draws = 200, std::uint64_t seed = 0x5eed) {
  const std::size_t r = samples.size();
  if (r < 200) throw RangeError("normality diagnostics need at least 200 samples, got " + std::to_string(r));
  const std::size_t d = samples.front().size();
  for (const auto& row : samples)
    if (row.size() != d) throw RangeError("samples have mismatched dimensions");
  NormalityReport rep;
  rep.replications = r;
  const auto scores = normal_scores(r);
  std::vector<double> col(r);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < r; ++k) col[k] = samples[k][i];
    rep.coordinates.push_back(diagnose_coordinate(col, scores));
    rep.degenerate = rep.degenerate || rep.coordinates.back().degenerate;
  }
  if (target_cov) {
    if (target_cov->size() != d * d) throw RangeError("target covariance has the wrong size");
    rep.covariance_distance = frobenius_distance(covariance_matrix(samples), *target_cov);
    std::vector<double> boots;
    std::vector<std::vector<double>> resample(r);
    for (std::size_t b = 0; b < bootstrap_draws; ++b) {
      rng::Stream s(rng::derive_key(seed, {b}));
      for (std::size_t k = 0; k < r; ++k) resample[k] = samples[s.below(r)];
      boots.push_back(frobenius_distance(covariance_matrix(resample), *target_cov));
    }
    rep.covariance_distance_se = bootstrap_draws >= 2 ? std::sqrt(sample_variance(boots)) : 0.0;
  }
  return rep;
}

}  // namespace voterdyn
