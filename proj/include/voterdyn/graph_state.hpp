#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "voterdyn/errors.hpp"
#include "voterdyn/patterns.hpp"

namespace voterdyn {

/// Snapshot of G_n(t): one opinion per vertex and a symmetric set of active
/// edges, stored as adjacency bit rows. Opinion bit masks are kept in sync so
/// embedding search can filter candidates with word operations.
class GraphState {
 public:
  GraphState() = default;

  explicit GraphState(std::size_t n) : GraphState(std::vector<Opinion>(n, Opinion::minus)) {}

  explicit GraphState(std::vector<Opinion> opinions)
      : n_(opinions.size()),
        words_((opinions.size() + 63) / 64),
        opinions_(std::move(opinions)),
        rows_(n_ * words_, 0),
        plus_(words_, 0),
        minus_(words_, 0) {
    for (std::size_t v = 0; v < n_; ++v) mask(opinions_[v])[v / 64] |= bit(v);
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t words() const noexcept { return words_; }

  Opinion opinion(std::size_t v) const { return opinions_.at(v); }
  const std::vector<Opinion>& opinions() const noexcept { return opinions_; }

  void set_opinion(std::size_t v, Opinion o) {
    check(v);
    if (opinions_[v] == o) return;
    mask(opinions_[v])[v / 64] &= ~bit(v);
    opinions_[v] = o;
    mask(o)[v / 64] |= bit(v);
  }

  bool has_edge(std::size_t u, std::size_t v) const {
    check(u);
    check(v);
    return (rows_[u * words_ + v / 64] & bit(v)) != 0;
  }

  void set_edge(std::size_t u, std::size_t v, bool active) {
    check(u);
    check(v);
    if (u == v) throw RangeError("self-loop (" + std::to_string(u) + "," + std::to_string(u) + ")");
    if (active) {
      rows_[u * words_ + v / 64] |= bit(v);
      rows_[v * words_ + u / 64] |= bit(u);
    } else {
      rows_[u * words_ + v / 64] &= ~bit(v);
      rows_[v * words_ + u / 64] &= ~bit(u);
    }
  }

  std::span<const std::uint64_t> row(std::size_t v) const {
    return {rows_.data() + v * words_, words_};
  }
  std::span<const std::uint64_t> opinion_mask(Opinion o) const {
    return o == Opinion::plus ? std::span<const std::uint64_t>(plus_) : std::span<const std::uint64_t>(minus_);
  }

  std::size_t degree(std::size_t v) const {
    std::size_t d = 0;
    for (auto w : row(v)) d += static_cast<std::size_t>(std::popcount(w));
    return d;
  }

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (auto w : rows_) twice += static_cast<std::size_t>(std::popcount(w));
    return twice / 2;
  }

  std::vector<std::uint32_t> neighbors(std::size_t v) const {
    std::vector<std::uint32_t> out;
    auto r = row(v);
    for (std::size_t i = 0; i < words_; ++i)
      for (std::uint64_t w = r[i]; w != 0; w &= w - 1)
        out.push_back(static_cast<std::uint32_t>(i * 64 + static_cast<std::size_t>(std::countr_zero(w))));
    return out;
  }

  friend bool operator==(const GraphState& a, const GraphState& b) {
    return a.n_ == b.n_ && a.opinions_ == b.opinions_ && a.rows_ == b.rows_;
  }

 private:
  static constexpr std::uint64_t bit(std::size_t v) noexcept { return std::uint64_t{1} << (v % 64); }
  std::vector<std::uint64_t>& mask(Opinion o) { return o == Opinion::plus ? plus_ : minus_; }
  void check(std::size_t v) const {
    if (v >= n_)
      throw RangeError("vertex " + std::to_string(v) + " out of range for n=" + std::to_string(n_));
  }

  std::size_t n_ = 0;
  std::size_t words_ = 0;
  std::vector<Opinion> opinions_;
  std::vector<std::uint64_t> rows_;
  std::vector<std::uint64_t> plus_;
  std::vector<std::uint64_t> minus_;
};

}  // namespace voterdyn
