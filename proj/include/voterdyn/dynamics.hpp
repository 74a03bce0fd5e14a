#pragma once

// Exact continuous-time simulation of the voter model on a dynamic random
// graph, in two flavors:
//
//  * one-way feedback: every vertex flips - -> + at rate gamma_mp and + -> -
//    at rate gamma_pm, ignoring the graph; every edge carries a rate-1 clock
//    and at each ring becomes active with a probability set by the current
//    endpoint opinions (pi_plus, pi_minus, or their mean for mixed pairs).
//  * two-way (co-evolutionary): same edge law, but each vertex has a
//    rate-beta clock and copies the opinion of a uniformly chosen active
//    neighbor when it rings.
//
// Opinion paths are simulated eagerly. Edge histories are materialized on
// first touch from a per-edge counter stream, so untouched edges cost
// nothing and the realization does not depend on the order of queries.
// Ring times of an edge and vertex clock times do not depend on the state,
// which lets the two-way model resolve edge states lazily as well: an edge's
// state at time t only needs the opinions at its last ring before t.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "voterdyn/errors.hpp"
#include "voterdyn/graph_state.hpp"
#include "voterdyn/patterns.hpp"
#include "voterdyn/rng.hpp"

namespace voterdyn {

enum class ModelKind : std::uint8_t { one_way, two_way };

/// Opinion-dependent edge law shared by both models.
struct EdgeLaw {
  double p0 = 0.0;
  double pi_plus = 0.0;
  double pi_minus = 0.0;

  /// Probability that a ring leaves the edge active. Mixed pairs use the mean.
  constexpr double resample_probability(Opinion a, Opinion b) const noexcept {
    if (a != b) return 0.5 * (pi_plus + pi_minus);
    return a == Opinion::plus ? pi_plus : pi_minus;
  }
};

namespace detail {
inline void require_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw RangeError(std::string(name) + " must lie in [0,1]");
}
inline void require_rate(double r, const char* name) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw RangeError(std::string(name) + " must be a finite rate >= 0");
}
inline void require_horizon(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw RangeError("horizon must be positive and finite");
}
}  // namespace detail

struct OneWayParams {
  std::size_t n = 1;
  double p0 = 0.0;
  double gamma_mp = 0.0;  ///< rate of - -> +
  double gamma_pm = 0.0;  ///< rate of + -> -
  double pi_plus = 0.0;
  double pi_minus = 0.0;
  double q0 = 0.5;  ///< P(initial opinion is +)
  double horizon = 1.0;
  double y0 = 0.0;  ///< initial generalized type

  void validate() const {
    if (n < 1) throw RangeError("n must be at least 1");
    detail::require_probability(p0, "p0");
    detail::require_probability(pi_plus, "pi_plus");
    detail::require_probability(pi_minus, "pi_minus");
    detail::require_probability(q0, "q0");
    detail::require_probability(y0, "y0");
    detail::require_rate(gamma_mp, "gamma_mp");
    detail::require_rate(gamma_pm, "gamma_pm");
    detail::require_horizon(horizon);
  }
  EdgeLaw edge_law() const noexcept { return {p0, pi_plus, pi_minus}; }
};

struct TwoWayParams {
  std::size_t n = 1;
  double p0 = 0.0;
  double pi_plus = 0.0;
  double pi_minus = 0.0;
  double q0 = 0.5;
  double horizon = 1.0;
  double beta = 0.0;  ///< vertex clock rate

  void validate() const {
    if (n < 1) throw RangeError("n must be at least 1");
    detail::require_probability(p0, "p0");
    detail::require_probability(pi_plus, "pi_plus");
    detail::require_probability(pi_minus, "pi_minus");
    detail::require_probability(q0, "q0");
    detail::require_rate(beta, "beta");
    detail::require_horizon(horizon);
  }
  EdgeLaw edge_law() const noexcept { return {p0, pi_plus, pi_minus}; }
};

/// Piecewise-constant opinion trajectory, right-continuous at flips.
class OpinionPath {
 public:
  OpinionPath() = default;
  explicit OpinionPath(Opinion initial, std::vector<double> flip_times = {})
      : initial_(initial), flips_(std::move(flip_times)) {
    for (std::size_t i = 0; i < flips_.size(); ++i)
      if (!(flips_[i] > 0.0) || (i > 0 && !(flips_[i] > flips_[i - 1])))
        throw RangeError("flip times must be positive and strictly increasing");
  }

  Opinion initial() const noexcept { return initial_; }
  const std::vector<double>& flip_times() const noexcept { return flips_; }

  /// Opinion at t, counting flips at times <= t.
  Opinion at(double t) const noexcept {
    const auto k = std::upper_bound(flips_.begin(), flips_.end(), t) - flips_.begin();
    return (k % 2 == 0) ? initial_ : negate(initial_);
  }

  /// Left limit: opinion just before t.
  Opinion before(double t) const noexcept {
    const auto k = std::lower_bound(flips_.begin(), flips_.end(), t) - flips_.begin();
    return (k % 2 == 0) ? initial_ : negate(initial_);
  }

  void append_flip(double t) {
    if (!(t > 0.0) || (!flips_.empty() && !(t > flips_.back())))
      throw RangeError("flip times must be positive and strictly increasing");
    flips_.push_back(t);
  }

  /// Calls f(lo, hi, opinion) for each constant piece of the path on [a, b].
  template <class F>
  void for_each_piece(double a, double b, F&& f) const {
    if (!(b > a)) return;
    auto it = std::upper_bound(flips_.begin(), flips_.end(), a);
    Opinion cur = ((it - flips_.begin()) % 2 == 0) ? initial_ : negate(initial_);
    double lo = a;
    for (; it != flips_.end() && *it < b; ++it) {
      f(lo, *it, cur);
      lo = *it;
      cur = negate(cur);
    }
    f(lo, b, cur);
  }

  friend bool operator==(const OpinionPath&, const OpinionPath&) = default;

 private:
  Opinion initial_ = Opinion::minus;
  std::vector<double> flips_;
};

/// Exact two-state chain sample on [0, horizon]: initial + with probability
/// q0, holding times Exp(gamma_mp) in - and Exp(gamma_pm) in +.
inline OpinionPath simulate_opinion_path(const OneWayParams& params, rng::Stream& stream) {
  Opinion x = stream.uniform() < params.q0 ? Opinion::plus : Opinion::minus;
  OpinionPath path(x);
  double t = 0.0;
  for (;;) {
    const double rate = x == Opinion::plus ? params.gamma_pm : params.gamma_mp;
    if (rate <= 0.0) break;
    t += stream.exponential(rate);
    if (t > params.horizon) break;
    path.append_flip(t);
    x = negate(x);
  }
  return path;
}

/// P(x(t) = +) for the two-state chain started from Bernoulli(q0).
inline double analytic_p_plus(double t, const OneWayParams& params) {
  if (t < 0.0) throw RangeError("time must be non-negative");
  const double total = params.gamma_mp + params.gamma_pm;
  if (total <= 0.0) return params.q0;
  const double stationary = params.gamma_mp / total;
  return stationary + (params.q0 - stationary) * std::exp(-total * t);
}

/// P(x(s + dt) = to | x(s) = from) for the two-state chain.
inline double two_state_transition(const OneWayParams& params, Opinion from, Opinion to, double dt) {
  const double total = params.gamma_mp + params.gamma_pm;
  if (total <= 0.0) return from == to ? 1.0 : 0.0;
  const double stationary_plus = params.gamma_mp / total;
  const double decay = std::exp(-total * dt);
  const double start = from == Opinion::plus ? 1.0 : 0.0;
  const double p_plus = stationary_plus + (start - stationary_plus) * decay;
  return to == Opinion::plus ? p_plus : 1.0 - p_plus;
}

/// ∫_a^b e^{-(t_ref - τ)} 1{x(τ) = +} dτ.
inline double discounted_plus_time(const OpinionPath& path, double a, double b, double t_ref) {
  double acc = 0.0;
  path.for_each_piece(a, b, [&](double lo, double hi, Opinion o) {
    if (o == Opinion::plus) acc += std::exp(-(t_ref - hi)) * -std::expm1(-(hi - lo));
  });
  return acc;
}

/// Generalized type y(t) = e^{-t} y0 + ∫_0^t e^{-s} 1{x(t-s) = +} ds.
inline double vertex_type(const OpinionPath& path, double y0, double t) {
  if (t < 0.0) throw RangeError("time must be non-negative");
  return std::exp(-t) * y0 + discounted_plus_time(path, 0.0, t, t);
}

/// ∫_a^b e^{-(t_ref - τ)} π(x_u(τ), x_v(τ)) dτ over the joint constant pieces.
inline double discounted_resample_mass(const OpinionPath& pu, const OpinionPath& pv,
                                       const EdgeLaw& law, double a, double b, double t_ref) {
  if (!(b > a)) return 0.0;
  std::vector<double> cuts{a, b};
  for (double f : pu.flip_times())
    if (f > a && f < b) cuts.push_back(f);
  for (double f : pv.flip_times())
    if (f > a && f < b) cuts.push_back(f);
  std::sort(cuts.begin(), cuts.end());
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i];
    const double hi = cuts[i + 1];
    if (!(hi > lo)) continue;
    const double mid = 0.5 * (lo + hi);
    const double pi = law.resample_probability(pu.at(mid), pv.at(mid));
    acc += pi * std::exp(-(t_ref - hi)) * -std::expm1(-(hi - lo));
  }
  return acc;
}

/// P(edge active at t | both opinion paths), for an edge started from
/// Bernoulli(p0): either no ring in [0,t] or the last ring at τ decided it.
inline double conditional_edge_prob(const OpinionPath& pu, const OpinionPath& pv, double t,
                                    const EdgeLaw& law) {
  return law.p0 * std::exp(-t) + discounted_resample_mass(pu, pv, law, 0.0, t, t);
}

inline double conditional_edge_prob(const OpinionPath& pu, const OpinionPath& pv, double t,
                                    const OneWayParams& params) {
  return conditional_edge_prob(pu, pv, t, params.edge_law());
}

/// P(edge active at every time in `times` | both opinion paths). Given the
/// paths the edge is a two-state Markov process: from active at s it is
/// active at t with probability e^{-(t-s)} + ∫_s^t e^{-(t-τ)} π(τ) dτ.
inline double conditional_edge_joint(const OpinionPath& pu, const OpinionPath& pv,
                                     std::span<const double> times, const EdgeLaw& law) {
  if (times.empty()) return 1.0;
  if (!std::is_sorted(times.begin(), times.end())) throw RangeError("times must be sorted");
  double p = conditional_edge_prob(pu, pv, times[0], law);
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double s = times[i - 1];
    const double t = times[i];
    p *= std::exp(-(t - s)) + discounted_resample_mass(pu, pv, law, s, t, t);
  }
  return p;
}

struct EdgeRing {
  double time;
  bool outcome;
  friend bool operator==(const EdgeRing&, const EdgeRing&) = default;
};

/// Full activity record of one vertex pair: a(t) is the outcome of the last
/// ring at or before t, or the initial draw when there is none.
struct EdgeHistory {
  bool initial_active = false;
  std::vector<EdgeRing> rings;

  bool at(double t) const noexcept {
    bool state = initial_active;
    for (const auto& r : rings) {
      if (r.time > t) break;
      state = r.outcome;
    }
    return state;
  }
  friend bool operator==(const EdgeHistory&, const EdgeHistory&) = default;
};

/// A state change of the process. Ordered by (time, kind, u, v).
struct TrajectoryEvent {
  enum class Kind : std::uint8_t { opinion = 0, edge = 1 };
  double time;
  Kind kind;
  std::uint32_t u;
  std::uint32_t v;  ///< equals u for opinion events
  bool value;       ///< new edge activity, or true when the new opinion is +

  friend bool operator==(const TrajectoryEvent&, const TrajectoryEvent&) = default;
};

/// One realization of G_n on [0, horizon]. Not thread safe: edge queries
/// materialize and cache edge clocks. Distinct trajectories are independent
/// objects and may live on different workers.
class Trajectory {
 public:
  static Trajectory one_way(const OneWayParams& params, std::uint64_t seed,
                            std::uint64_t replication = 0) {
    params.validate();
    Trajectory tr(ModelKind::one_way, params.n, params.edge_law(), params.horizon, seed, replication);
    for (std::size_t v = 0; v < params.n; ++v) {
      rng::Stream stream(rng::substream(rng::vertex_key(seed, replication, v), kPathTag));
      tr.paths_.push_back(simulate_opinion_path(params, stream));
    }
    return tr;
  }

  static Trajectory two_way(const TwoWayParams& params, std::uint64_t seed,
                            std::uint64_t replication = 0) {
    params.validate();
    Trajectory tr(ModelKind::two_way, params.n, params.edge_law(), params.horizon, seed, replication);
    struct ClockRing {
      double time;
      std::uint32_t vertex;
      std::uint32_t index;
    };
    std::vector<ClockRing> clock;
    for (std::size_t v = 0; v < params.n; ++v) {
      const auto key = rng::vertex_key(seed, replication, v);
      const bool plus = rng::uniform_at(rng::substream(key, kInitTag), 0) < params.q0;
      tr.paths_.emplace_back(plus ? Opinion::plus : Opinion::minus);
      if (params.beta <= 0.0) continue;
      rng::Stream stream(rng::substream(key, kClockTag));
      double t = 0.0;
      for (std::uint32_t k = 0;; ++k) {
        t += stream.exponential(params.beta);
        if (t > params.horizon) break;
        clock.push_back({t, static_cast<std::uint32_t>(v), k});
      }
    }
    std::sort(clock.begin(), clock.end(), [](const ClockRing& a, const ClockRing& b) {
      return a.time != b.time ? a.time < b.time : a.vertex < b.vertex;
    });
    // A vertex event at τ looks at the left limit G(τ-): edges decided by
    // rings strictly before τ, neighbor opinions just before τ. Isolated
    // vertices keep their opinion.
    std::vector<std::uint32_t> neighbors;
    for (const auto& ring : clock) {
      neighbors.clear();
      for (std::uint32_t w = 0; w < params.n; ++w) {
        if (w == ring.vertex) continue;
        const auto [a, b] = std::minmax(w, ring.vertex);
        if (tr.active_at(tr.slot(a, b), a, b, ring.time, true)) neighbors.push_back(w);
      }
      if (neighbors.empty()) continue;
      const auto key = rng::vertex_key(seed, replication, ring.vertex);
      const double u = rng::uniform_at(rng::substream(key, kChoiceTag), ring.index);
      const auto pick = std::min(neighbors.size() - 1, static_cast<std::size_t>(u * static_cast<double>(neighbors.size())));
      const Opinion target = tr.paths_[neighbors[pick]].before(ring.time);
      auto& path = tr.paths_[ring.vertex];
      if (path.before(ring.time) != target) path.append_flip(ring.time);
    }
    return tr;
  }

  ModelKind model() const noexcept { return model_; }
  std::size_t n() const noexcept { return n_; }
  double horizon() const noexcept { return horizon_; }
  const EdgeLaw& edge_law() const noexcept { return law_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t replication() const noexcept { return replication_; }

  const OpinionPath& opinion_path(std::size_t v) const { return paths_.at(v); }
  Opinion opinion(std::size_t v, double t) const {
    check_time(t);
    return paths_.at(v).at(t);
  }

  bool edge_active(std::size_t u, std::size_t v, double t) {
    check_time(t);
    check_pair(u, v);
    const auto [a, b] = std::minmax(u, v);
    return active_at(slot(a, b), a, b, t, false);
  }

  /// Complete ring record of the pair, with outcomes.
  EdgeHistory edge_history(std::size_t u, std::size_t v) {
    check_pair(u, v);
    const auto [a, b] = std::minmax(u, v);
    const EdgeSlot& s = slot(a, b);
    EdgeHistory h;
    h.initial_active = s.initial;
    for (std::uint32_t k = 0; k < s.count; ++k)
      h.rings.push_back({ring_pool_[s.first + k], ring_outcome(s, a, b, k)});
    return h;
  }

  /// Snapshot G_n(t). Materializes every edge.
  GraphState state(double t) {
    check_time(t);
    std::vector<Opinion> ops(n_);
    for (std::size_t v = 0; v < n_; ++v) ops[v] = paths_[v].at(t);
    GraphState g(std::move(ops));
    for (std::size_t b = 1; b < n_; ++b)
      for (std::size_t a = 0; a < b; ++a)
        if (active_at(slot(a, b), a, b, t, false)) g.set_edge(a, b, true);
    return g;
  }

  /// Every state change in (t0, t1], sorted by (time, kind, u, v).
  std::vector<TrajectoryEvent> events(double t0, double t1) {
    check_time(t0);
    check_time(t1);
    if (t1 < t0) throw RangeError("event window is reversed");
    std::vector<TrajectoryEvent> out;
    for (std::size_t v = 0; v < n_; ++v) {
      const auto& path = paths_[v];
      for (double f : path.flip_times())
        if (f > t0 && f <= t1)
          out.push_back({f, TrajectoryEvent::Kind::opinion, static_cast<std::uint32_t>(v),
                         static_cast<std::uint32_t>(v), path.at(f) == Opinion::plus});
    }
    for (std::size_t b = 1; b < n_; ++b) {
      for (std::size_t a = 0; a < b; ++a) {
        const EdgeSlot& s = slot(a, b);
        bool current = active_at(s, a, b, t0, false);
        for (std::uint32_t k = 0; k < s.count; ++k) {
          const double tau = ring_pool_[s.first + k];
          if (tau <= t0) continue;
          if (tau > t1) break;
          const bool next = ring_outcome(s, a, b, k);
          if (next != current)
            out.push_back({tau, TrajectoryEvent::Kind::edge, static_cast<std::uint32_t>(a),
                           static_cast<std::uint32_t>(b), next});
          current = next;
        }
      }
    }
    std::sort(out.begin(), out.end(), [](const TrajectoryEvent& x, const TrajectoryEvent& y) {
      if (x.time != y.time) return x.time < y.time;
      if (x.kind != y.kind) return x.kind < y.kind;
      if (x.u != y.u) return x.u < y.u;
      return x.v < y.v;
    });
    return out;
  }

  std::size_t materialized_edges() const noexcept { return materialized_; }

 private:
  static constexpr std::uint64_t kPathTag = 1;
  static constexpr std::uint64_t kInitTag = 2;
  static constexpr std::uint64_t kClockTag = 3;
  static constexpr std::uint64_t kOutcomeTag = 4;
  static constexpr std::uint64_t kChoiceTag = 5;
  static constexpr std::size_t kDenseLimit = 1024;

  struct EdgeSlot {
    std::uint64_t outcome_key = 0;
    std::uint32_t first = 0;
    std::uint32_t count = 0;
    bool initial = false;
    bool ready = false;
  };

  Trajectory(ModelKind model, std::size_t n, EdgeLaw law, double horizon, std::uint64_t seed,
             std::uint64_t replication)
      : model_(model), n_(n), law_(law), horizon_(horizon), seed_(seed), replication_(replication) {
    paths_.reserve(n);
  }

  void check_time(double t) const {
    if (!(t >= 0.0 && t <= horizon_))
      throw RangeError("time " + std::to_string(t) + " outside [0, " + std::to_string(horizon_) + "]");
  }
  void check_pair(std::size_t u, std::size_t v) const {
    if (u >= n_ || v >= n_) throw RangeError("vertex out of range");
    if (u == v) throw RangeError("self-loop query");
  }

  // a < b
  EdgeSlot& slot(std::size_t a, std::size_t b) {
    EdgeSlot* s = nullptr;
    if (n_ <= kDenseLimit) {
      if (dense_.empty()) dense_.resize(n_ * (n_ - 1) / 2);
      s = &dense_[b * (b - 1) / 2 + a];
    } else {
      s = &sparse_[static_cast<std::uint64_t>(a) * n_ + b];
    }
    if (!s->ready) materialize(*s, a, b);
    return *s;
  }

  void materialize(EdgeSlot& s, std::size_t a, std::size_t b) {
    const auto key = rng::edge_key(seed_, replication_, a, b);
    s.initial = rng::uniform_at(rng::substream(key, kInitTag), 0) < law_.p0;
    s.outcome_key = rng::substream(key, kOutcomeTag);
    s.first = static_cast<std::uint32_t>(ring_pool_.size());
    rng::Stream clock(rng::substream(key, kClockTag));
    for (double t = clock.exponential(1.0); t <= horizon_; t += clock.exponential(1.0))
      ring_pool_.push_back(t);
    s.count = static_cast<std::uint32_t>(ring_pool_.size() - s.first);
    s.ready = true;
    ++materialized_;
  }

  bool ring_outcome(const EdgeSlot& s, std::size_t a, std::size_t b, std::uint32_t k) const {
    const double tau = ring_pool_[s.first + k];
    const double p = law_.resample_probability(paths_[a].at(tau), paths_[b].at(tau));
    return rng::uniform_at(s.outcome_key, k) < p;
  }

  // strict: only rings before t count (left limit).
  bool active_at(const EdgeSlot& s, std::size_t a, std::size_t b, double t, bool strict) const {
    const double* rings = ring_pool_.data() + s.first;
    std::uint32_t k = s.count;
    while (k > 0 && (strict ? rings[k - 1] >= t : rings[k - 1] > t)) --k;
    if (k == 0) return s.initial;
    return ring_outcome(s, a, b, k - 1);
  }

  ModelKind model_;
  std::size_t n_;
  EdgeLaw law_;
  double horizon_;
  std::uint64_t seed_;
  std::uint64_t replication_;
  std::vector<OpinionPath> paths_;
  std::vector<EdgeSlot> dense_;
  std::unordered_map<std::uint64_t, EdgeSlot> sparse_;
  std::vector<double> ring_pool_;
  std::size_t materialized_ = 0;
};

inline Trajectory build_one_way_trajectory(const OneWayParams& params, std::uint64_t seed,
                                           std::uint64_t replication = 0) {
  return Trajectory::one_way(params, seed, replication);
}

inline Trajectory simulate_two_way(const TwoWayParams& params, std::uint64_t seed,
                                   std::uint64_t replication = 0) {
  return Trajectory::two_way(params, seed, replication);
}

inline GraphState query_state(Trajectory& traj, double t) { return traj.state(t); }

}  // namespace voterdyn
