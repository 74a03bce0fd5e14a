#pragma once

// Voter-subgraph counts X(t) = number of opinion-preserving inclusions of a
// pattern H in a snapshot of G_n(t).
//
// count_pattern enumerates injective embeddings by backtracking over bit rows
// and divides by |Aut(H)|. count_bruteforce sums indicators over every
// labeled copy and serves as the oracle. IncrementalCounter maintains counts
// under single edge / opinion changes by recounting only the embeddings that
// touch the changed pair or vertex.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "voterdyn/dynamics.hpp"
#include "voterdyn/errors.hpp"
#include "voterdyn/graph_state.hpp"
#include "voterdyn/patterns.hpp"

namespace voterdyn {

/// 𝕀(h, state): all edges of h active and all opinions matching.
inline bool indicator(const LabeledVoterGraph& h, const GraphState& state) {
  for (auto label : h.labels)
    if (label >= state.n())
      throw RangeError("label " + std::to_string(label) + " out of range for n=" + std::to_string(state.n()));
  for (std::size_t k = 0; k < h.labels.size(); ++k)
    if (state.opinion(h.labels[k]) != h.opinion_at(k)) return false;
  for (auto [a, b] : h.pattern.edges())
    if (!state.has_edge(h.labels[a], h.labels[b])) return false;
  return true;
}

namespace detail {

/// Counts injective maps φ: V(H) -> [n] with x_{φ(p)} = x_p(H) and every
/// pattern edge mapped to an active edge. Some pattern vertices may be pinned.
class EmbeddingSearch {
 public:
  struct Pin {
    std::uint32_t pattern_vertex;
    std::uint32_t graph_vertex;
  };

  EmbeddingSearch(const VoterPattern& h, std::span<const Pin> pins) : h_(h) {
    const std::size_t v = h.vertex_count();
    std::uint32_t placed = 0;
    for (const auto& p : pins) {
      order_.push_back(p.pattern_vertex);
      placed |= 1u << p.pattern_vertex;
    }
    pinned_ = pins.size();
    // Greedy: most already-placed neighbors first, then degree, then index.
    while (order_.size() < v) {
      int best = -1;
      int best_back = -1;
      int best_deg = -1;
      for (std::uint32_t p = 0; p < v; ++p) {
        if ((placed >> p) & 1u) continue;
        const int back = std::popcount(h.neighbor_mask(p) & placed);
        const int deg = static_cast<int>(h.degree(p));
        if (back > best_back || (back == best_back && deg > best_deg)) {
          best = static_cast<int>(p);
          best_back = back;
          best_deg = deg;
        }
      }
      order_.push_back(static_cast<std::uint32_t>(best));
      placed |= 1u << best;
    }
    back_.resize(v);
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (h.adjacent(order_[i], order_[j])) back_[i].push_back(static_cast<std::uint32_t>(j));
  }

  std::uint64_t count(const GraphState& g, std::span<const Pin> pins) {
    const std::size_t v = order_.size();
    if (v > g.n()) return 0;
    image_.assign(v, 0);
    for (std::size_t i = 0; i < pinned_; ++i) {
      const auto x = pins[i].graph_vertex;
      if (x >= g.n()) throw RangeError("pinned vertex out of range");
      if (g.opinion(x) != h_.opinion(order_[i])) return 0;
      for (std::size_t j = 0; j < i; ++j)
        if (image_[j] == x) return 0;
      for (auto j : back_[i])
        if (!g.has_edge(x, image_[j])) return 0;
      image_[i] = x;
    }
    if (pinned_ == v) return 1;
    words_ = g.words();
    used_.assign(words_, 0);
    for (std::size_t i = 0; i < pinned_; ++i) used_[image_[i] / 64] |= std::uint64_t{1} << (image_[i] % 64);
    cand_.assign(v * words_, 0);
    return extend(g, pinned_);
  }

 private:
  std::uint64_t extend(const GraphState& g, std::size_t level) {
    std::uint64_t* cand = cand_.data() + level * words_;
    const auto mask = g.opinion_mask(h_.opinion(order_[level]));
    for (std::size_t w = 0; w < words_; ++w) cand[w] = mask[w] & ~used_[w];
    for (auto j : back_[level]) {
      const auto row = g.row(image_[j]);
      for (std::size_t w = 0; w < words_; ++w) cand[w] &= row[w];
    }
    if (level + 1 == order_.size()) {
      std::uint64_t total = 0;
      for (std::size_t w = 0; w < words_; ++w) total += static_cast<std::uint64_t>(std::popcount(cand[w]));
      return total;
    }
    std::uint64_t total = 0;
    for (std::size_t w = 0; w < words_; ++w) {
      for (std::uint64_t bits = cand[w]; bits != 0; bits &= bits - 1) {
        const auto x = static_cast<std::uint32_t>(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
        const std::uint64_t bit = std::uint64_t{1} << (x % 64);
        image_[level] = x;
        used_[w] |= bit;
        total += extend(g, level + 1);
        used_[w] &= ~bit;
      }
    }
    return total;
  }

  const VoterPattern& h_;
  std::vector<std::uint32_t> order_;  // level -> pattern vertex
  std::vector<std::vector<std::uint32_t>> back_;
  std::size_t pinned_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint32_t> image_;  // level -> graph vertex
  std::vector<std::uint64_t> used_;
  std::vector<std::uint64_t> cand_;
};

}  // namespace detail

/// Number of opinion-preserving injective embeddings of H into the state.
inline std::uint64_t count_embeddings(const GraphState& state, const VoterPattern& h) {
  detail::require_searchable(h);
  detail::EmbeddingSearch search(h, {});
  return search.count(state, {});
}

/// X = Σ_{h ∈ G_[n](H)} 𝕀(h, state).
inline std::uint64_t count_pattern(const GraphState& state, const VoterPattern& h) {
  const std::uint64_t embeddings = count_embeddings(state, h);
  const std::uint64_t aut = automorphism_count(h);
  if (embeddings % aut != 0)
    throw ConsistencyError("embedding total " + std::to_string(embeddings) + " not divisible by |Aut(H)|=" +
                           std::to_string(aut) + " for " + to_literal(h));
  return embeddings / aut;
}

/// Literal evaluation of the defining sum over all labeled copies.
inline std::uint64_t count_bruteforce(const GraphState& state, const VoterPattern& h) {
  if (state.n() > kMaxEnumerationLabels)
    throw SizeLimitError("brute-force counting is limited to n <= " + std::to_string(kMaxEnumerationLabels));
  std::vector<std::uint32_t> labels(state.n());
  std::iota(labels.begin(), labels.end(), 0u);
  std::uint64_t total = 0;
  for (const auto& copy : enumerate_labeled_copies(labels, h)) total += indicator(copy, state) ? 1 : 0;
  return total;
}

/// Embeddings that map some pattern vertex onto graph vertex v.
inline std::uint64_t count_rooted_at_vertex(const GraphState& state, const VoterPattern& h, std::uint32_t v) {
  std::uint64_t total = 0;
  for (std::uint32_t p = 0; p < h.vertex_count(); ++p) {
    const detail::EmbeddingSearch::Pin pin[1] = {{p, v}};
    detail::EmbeddingSearch search(h, pin);
    total += search.count(state, pin);
  }
  return total;
}

/// Embeddings that map some pattern edge onto the graph pair {u, v}. The
/// pair must be active for the result to be nonzero.
inline std::uint64_t count_rooted_at_edge(const GraphState& state, const VoterPattern& h, std::uint32_t u,
                                          std::uint32_t v) {
  std::uint64_t total = 0;
  for (auto [a, b] : h.edges()) {
    const detail::EmbeddingSearch::Pin fwd[2] = {{a, u}, {b, v}};
    const detail::EmbeddingSearch::Pin rev[2] = {{a, v}, {b, u}};
    detail::EmbeddingSearch s1(h, fwd);
    total += s1.count(state, fwd);
    detail::EmbeddingSearch s2(h, rev);
    total += s2.count(state, rev);
  }
  return total;
}

/// Largest pattern maintained by delta updates; larger ones are recounted.
inline constexpr std::size_t kMaxIncrementalVertices = 4;

/// Counts for a fixed pattern list, kept in sync with a mutable snapshot.
class IncrementalCounter {
 public:
  IncrementalCounter(GraphState initial, std::vector<VoterPattern> patterns)
      : state_(std::move(initial)), patterns_(std::move(patterns)) {
    for (const auto& h : patterns_) {
      automorphisms_.push_back(automorphism_count(h));
      embeddings_.push_back(count_embeddings(state_, h));
      incremental_.push_back(h.vertex_count() <= kMaxIncrementalVertices);
    }
    dirty_ = false;
  }

  const GraphState& state() const noexcept { return state_; }
  const std::vector<VoterPattern>& patterns() const noexcept { return patterns_; }

  void set_edge(std::uint32_t u, std::uint32_t v, bool active) {
    if (state_.has_edge(u, v) == active) return;
    if (active) {
      state_.set_edge(u, v, true);
      for (std::size_t i = 0; i < patterns_.size(); ++i)
        if (incremental_[i]) embeddings_[i] += count_rooted_at_edge(state_, patterns_[i], u, v);
    } else {
      for (std::size_t i = 0; i < patterns_.size(); ++i)
        if (incremental_[i]) embeddings_[i] -= count_rooted_at_edge(state_, patterns_[i], u, v);
      state_.set_edge(u, v, false);
    }
    dirty_ = true;
  }

  void set_opinion(std::uint32_t v, Opinion o) {
    if (state_.opinion(v) == o) return;
    for (std::size_t i = 0; i < patterns_.size(); ++i)
      if (incremental_[i]) embeddings_[i] -= count_rooted_at_vertex(state_, patterns_[i], v);
    state_.set_opinion(v, o);
    for (std::size_t i = 0; i < patterns_.size(); ++i)
      if (incremental_[i]) embeddings_[i] += count_rooted_at_vertex(state_, patterns_[i], v);
    dirty_ = true;
  }

  void apply(const TrajectoryEvent& e) {
    if (e.kind == TrajectoryEvent::Kind::edge)
      set_edge(e.u, e.v, e.value);
    else
      set_opinion(e.u, e.value ? Opinion::plus : Opinion::minus);
  }

  std::vector<std::uint64_t> counts() {
    if (dirty_) {
      for (std::size_t i = 0; i < patterns_.size(); ++i)
        if (!incremental_[i]) embeddings_[i] = count_embeddings(state_, patterns_[i]);
      dirty_ = false;
    }
    std::vector<std::uint64_t> out(patterns_.size());
    for (std::size_t i = 0; i < patterns_.size(); ++i) {
      if (embeddings_[i] % automorphisms_[i] != 0)
        throw ConsistencyError("incremental embedding total not divisible by |Aut(H)|");
      out[i] = embeddings_[i] / automorphisms_[i];
    }
    return out;
  }

 private:
  GraphState state_;
  std::vector<VoterPattern> patterns_;
  std::vector<std::uint64_t> automorphisms_;
  std::vector<std::uint64_t> embeddings_;
  std::vector<bool> incremental_;
  bool dirty_ = false;
};

/// X_{n,i}(t) for every pattern at one checkpoint.
struct CountVector {
  double time = 0.0;
  std::vector<std::uint64_t> values;
  friend bool operator==(const CountVector&, const CountVector&) = default;
};

enum class CountingMode : std::uint8_t { full, incremental };

/// Counts at each checkpoint. Incremental mode replays the event log between
/// checkpoints; full mode recounts each snapshot from scratch.
inline std::vector<CountVector> counts_along_trajectory(Trajectory& traj, const std::vector<VoterPattern>& patterns,
                                                        std::span<const double> times,
                                                        CountingMode mode = CountingMode::incremental) {
  if (!std::is_sorted(times.begin(), times.end())) throw RangeError("checkpoint times must be sorted");
  std::vector<CountVector> out;
  if (times.empty()) return out;
  if (mode == CountingMode::full) {
    for (double t : times) {
      const GraphState g = traj.state(t);
      CountVector cv{t, {}};
      for (const auto& h : patterns) cv.values.push_back(count_pattern(g, h));
      out.push_back(std::move(cv));
    }
    return out;
  }
  IncrementalCounter counter(traj.state(times[0]), patterns);
  out.push_back({times[0], counter.counts()});
  for (std::size_t k = 1; k < times.size(); ++k) {
    for (const auto& e : traj.events(times[k - 1], times[k])) counter.apply(e);
    out.push_back({times[k], counter.counts()});
  }
  return out;
}

}  // namespace voterdyn
