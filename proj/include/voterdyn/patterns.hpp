#pragma once

// Voter patterns: small simple graphs with an opinion attached to every
// vertex, their opinion-preserving symmetries, and labeled placements on
// named vertex sets.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "voterdyn/errors.hpp"

namespace voterdyn {

enum class Opinion : std::uint8_t { minus = 0, plus = 1 };

constexpr Opinion negate(Opinion o) noexcept {
  return o == Opinion::plus ? Opinion::minus : Opinion::plus;
}

constexpr char to_char(Opinion o) noexcept { return o == Opinion::plus ? '+' : '-'; }

inline Opinion opinion_from_char(char c) {
  if (c == '+') return Opinion::plus;
  if (c == '-') return Opinion::minus;
  throw PatternError(std::string("invalid opinion symbol '") + c + "'");
}

/// Largest pattern handled by exhaustive permutation search.
inline constexpr std::size_t kMaxSearchVertices = 8;
/// Largest label set accepted by enumerate_labeled_copies.
inline constexpr std::size_t kMaxEnumerationLabels = 12;
/// Hard cap on pattern size (adjacency is stored as 32-bit masks).
inline constexpr std::size_t kMaxPatternVertices = 32;

class VoterPattern {
 public:
  using Edge = std::pair<std::uint32_t, std::uint32_t>;

  VoterPattern() = default;

  /// Validates and canonicalizes: each pair ordered (a < b), edge list sorted.
  static VoterPattern build(std::vector<Opinion> opinions, std::vector<Edge> edges) {
    const std::size_t v = opinions.size();
    if (v == 0) throw PatternError("a pattern needs at least one vertex");
    if (v > kMaxPatternVertices)
      throw SizeLimitError("pattern has " + std::to_string(v) + " vertices; limit is " +
                           std::to_string(kMaxPatternVertices));
    VoterPattern p;
    p.opinions_ = std::move(opinions);
    p.adjacency_.assign(v, 0);
    for (auto [a, b] : edges) {
      const std::string name = "(" + std::to_string(a) + "," + std::to_string(b) + ")";
      if (a == b) throw PatternError("self-loop at edge " + name);
      if (a >= v || b >= v) throw PatternError("edge " + name + " references a missing vertex");
      if (a > b) std::swap(a, b);
      if (p.adjacency_[a] & (1u << b)) throw PatternError("duplicate edge " + name);
      p.adjacency_[a] |= 1u << b;
      p.adjacency_[b] |= 1u << a;
      p.edges_.emplace_back(a, b);
    }
    std::sort(p.edges_.begin(), p.edges_.end());
    return p;
  }

  std::size_t vertex_count() const noexcept { return opinions_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  Opinion opinion(std::size_t v) const { return opinions_.at(v); }
  const std::vector<Opinion>& opinions() const noexcept { return opinions_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::uint32_t neighbor_mask(std::size_t v) const { return adjacency_.at(v); }
  bool adjacent(std::size_t a, std::size_t b) const { return (adjacency_.at(a) >> b) & 1u; }
  std::size_t degree(std::size_t v) const {
    return static_cast<std::size_t>(std::popcount(adjacency_.at(v)));
  }

  friend bool operator==(const VoterPattern& x, const VoterPattern& y) {
    return x.opinions_ == y.opinions_ && x.edges_ == y.edges_;
  }
  friend bool operator<(const VoterPattern& x, const VoterPattern& y) {
    if (x.opinions_ != y.opinions_) return x.opinions_ < y.opinions_;
    return x.edges_ < y.edges_;
  }

 private:
  std::vector<Opinion> opinions_;
  std::vector<Edge> edges_;
  std::vector<std::uint32_t> adjacency_;
};

inline VoterPattern build_pattern(std::vector<Opinion> opinions,
                                  std::vector<VoterPattern::Edge> edges) {
  return VoterPattern::build(std::move(opinions), std::move(edges));
}

// Frequently used motifs.
inline VoterPattern single_vertex_pattern(Opinion o) { return build_pattern({o}, {}); }
inline VoterPattern edge_pattern(Opinion a, Opinion b) { return build_pattern({a, b}, {{0, 1}}); }
inline VoterPattern triangle_pattern(Opinion a, Opinion b, Opinion c) {
  return build_pattern({a, b, c}, {{0, 1}, {1, 2}, {0, 2}});
}
/// Path 0-1-2 (1 is the center).
inline VoterPattern path3_pattern(Opinion a, Opinion center, Opinion c) {
  return build_pattern({a, center, c}, {{0, 1}, {1, 2}});
}

// ---------------------------------------------------------------------------
// Pattern literal:  "V=3; opinions=+-+; edges=0-1,1-2"  (whitespace ignored)

namespace detail {
inline std::string strip_spaces(std::string_view s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  return out;
}

inline std::uint32_t parse_index(std::string_view s, std::string_view what) {
  if (s.empty() || s.size() > 9 ||
      !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
    throw PatternError("invalid " + std::string(what) + " '" + std::string(s) + "'");
  return static_cast<std::uint32_t>(std::stoul(std::string(s)));
}
}  // namespace detail

inline VoterPattern parse_pattern(std::string_view literal) {
  const std::string text = detail::strip_spaces(literal);
  long declared = -1;
  std::string opinions;
  std::string edge_text;
  bool have_opinions = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(';', pos);
    if (end == std::string::npos) end = text.size();
    const std::string field = text.substr(pos, end - pos);
    pos = end + 1;
    if (field.empty()) continue;
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw PatternError("field without '=': '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "V") {
      declared = detail::parse_index(value, "vertex count");
    } else if (key == "opinions") {
      opinions = value;
      have_opinions = true;
    } else if (key == "edges") {
      edge_text = value;
    } else {
      throw PatternError("unknown pattern field '" + key + "'");
    }
  }
  if (declared < 0) throw PatternError("pattern literal lacks V=");
  if (!have_opinions) throw PatternError("pattern literal lacks opinions=");
  if (static_cast<long>(opinions.size()) != declared)
    throw PatternError("V=" + std::to_string(declared) + " but " +
                       std::to_string(opinions.size()) + " opinions given");
  std::vector<Opinion> ops;
  for (char c : opinions) ops.push_back(opinion_from_char(c));
  std::vector<VoterPattern::Edge> edges;
  std::size_t p = 0;
  while (p < edge_text.size()) {
    std::size_t end = edge_text.find(',', p);
    if (end == std::string::npos) end = edge_text.size();
    const std::string item = edge_text.substr(p, end - p);
    p = end + 1;
    if (item.empty()) throw PatternError("empty edge in '" + edge_text + "'");
    const auto dash = item.find('-');
    if (dash == std::string::npos) throw PatternError("edge '" + item + "' lacks '-'");
    edges.emplace_back(detail::parse_index(item.substr(0, dash), "edge endpoint"),
                       detail::parse_index(item.substr(dash + 1), "edge endpoint"));
  }
  return build_pattern(std::move(ops), std::move(edges));
}

inline std::string to_literal(const VoterPattern& h) {
  std::string s = "V=" + std::to_string(h.vertex_count()) + "; opinions=";
  for (Opinion o : h.opinions()) s.push_back(to_char(o));
  s += "; edges=";
  bool first = true;
  for (auto [a, b] : h.edges()) {
    if (!first) s.push_back(',');
    first = false;
    s += std::to_string(a) + "-" + std::to_string(b);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Exhaustive symmetry search

namespace detail {

inline void require_searchable(const VoterPattern& h) {
  if (h.vertex_count() > kMaxSearchVertices)
    throw SizeLimitError("pattern has " + std::to_string(h.vertex_count()) +
                         " vertices; exhaustive search is limited to " +
                         std::to_string(kMaxSearchVertices));
}

// Counts (or detects, when stop_at_first) opinion- and edge-preserving
// bijections from a onto b. Edge counts must already agree, so mapping every
// edge of a onto an edge of b makes the bijection an isomorphism.
inline std::uint64_t count_isomorphisms(const VoterPattern& a, const VoterPattern& b,
                                        bool stop_at_first) {
  const std::size_t v = a.vertex_count();
  std::vector<std::uint32_t> image(v, 0);
  std::uint32_t used = 0;
  std::uint64_t found = 0;
  auto extend = [&](auto&& self, std::size_t i) -> bool {
    if (i == v) {
      ++found;
      return stop_at_first;
    }
    for (std::uint32_t c = 0; c < v; ++c) {
      if ((used >> c) & 1u) continue;
      if (a.opinion(i) != b.opinion(c) || a.degree(i) != b.degree(c)) continue;
      bool ok = true;
      for (std::size_t j = 0; j < i && ok; ++j)
        ok = a.adjacent(i, j) == b.adjacent(c, image[j]);
      if (!ok) continue;
      image[i] = c;
      used |= 1u << c;
      if (self(self, i + 1)) return true;
      used &= ~(1u << c);
    }
    return false;
  };
  extend(extend, 0);
  return found;
}

}  // namespace detail

/// True iff an edge- and opinion-preserving vertex bijection exists.
inline bool are_isomorphic(const VoterPattern& h1, const VoterPattern& h2) {
  detail::require_searchable(h1);
  detail::require_searchable(h2);
  if (h1.vertex_count() != h2.vertex_count() || h1.edge_count() != h2.edge_count()) return false;
  return detail::count_isomorphisms(h1, h2, true) > 0;
}

/// |Aut(H)|: permutations preserving both edges and opinions.
inline std::uint64_t automorphism_count(const VoterPattern& h) {
  detail::require_searchable(h);
  return detail::count_isomorphisms(h, h, false);
}

/// Lexicographically smallest (opinions, sorted edges) encoding over all
/// vertex relabelings. Two patterns are isomorphic iff their forms agree.
inline std::vector<std::uint8_t> canonical_form(const VoterPattern& h) {
  detail::require_searchable(h);
  const std::size_t v = h.vertex_count();
  std::vector<std::uint32_t> perm(v);  // perm[new] = old
  std::iota(perm.begin(), perm.end(), 0u);
  std::vector<std::uint32_t> inverse(v);
  std::vector<std::uint8_t> best;
  std::vector<std::uint8_t> code;
  std::vector<std::pair<std::uint8_t, std::uint8_t>> edges;
  do {
    for (std::size_t k = 0; k < v; ++k) inverse[perm[k]] = static_cast<std::uint32_t>(k);
    code.clear();
    code.push_back(static_cast<std::uint8_t>(v));
    for (std::size_t k = 0; k < v; ++k) code.push_back(static_cast<std::uint8_t>(h.opinion(perm[k])));
    edges.clear();
    for (auto [a, b] : h.edges()) {
      auto x = static_cast<std::uint8_t>(inverse[a]);
      auto y = static_cast<std::uint8_t>(inverse[b]);
      if (x > y) std::swap(x, y);
      edges.emplace_back(x, y);
    }
    std::sort(edges.begin(), edges.end());
    for (auto [x, y] : edges) {
      code.push_back(x);
      code.push_back(y);
    }
    if (best.empty() || code < best) best = code;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// ---------------------------------------------------------------------------
// Labeled copies

/// |G_S(H)| = |S|! / ((|S| - V(H))! A(H)); zero when |S| < V(H).
inline std::uint64_t labeled_copy_count(std::uint64_t set_size, const VoterPattern& h) {
  const std::uint64_t v = h.vertex_count();
  if (set_size < v) return 0;
  unsigned __int128 falling = 1;
  for (std::uint64_t k = 0; k < v; ++k) {
    falling *= set_size - k;
    if (falling >> 100) throw SizeLimitError("labeled copy count overflows");
  }
  const unsigned __int128 count = falling / automorphism_count(h);
  if (count > std::numeric_limits<std::uint64_t>::max())
    throw SizeLimitError("labeled copy count overflows 64 bits");
  return static_cast<std::uint64_t>(count);
}

/// A pattern placed on concrete vertex names. Local vertex k of `pattern`
/// sits on `labels[k]`; labels are strictly increasing.
struct LabeledVoterGraph {
  std::vector<std::uint32_t> labels;
  VoterPattern pattern;

  std::size_t vertex_count() const noexcept { return labels.size(); }
  Opinion opinion_at(std::size_t k) const { return pattern.opinion(k); }

  /// Edge set in label coordinates, each pair (smaller, larger).
  std::vector<std::pair<std::uint32_t, std::uint32_t>> labeled_edges() const {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    out.reserve(pattern.edge_count());
    for (auto [a, b] : pattern.edges()) out.emplace_back(labels[a], labels[b]);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// h ⊏ g: every label and labeled edge of this graph appears in g.
  bool is_subgraph_of(const LabeledVoterGraph& g) const {
    for (std::size_t k = 0; k < labels.size(); ++k) {
      auto it = std::lower_bound(g.labels.begin(), g.labels.end(), labels[k]);
      if (it == g.labels.end() || *it != labels[k]) return false;
      if (g.opinion_at(static_cast<std::size_t>(it - g.labels.begin())) != opinion_at(k))
        return false;
    }
    auto mine = labeled_edges();
    auto theirs = g.labeled_edges();
    return std::includes(theirs.begin(), theirs.end(), mine.begin(), mine.end());
  }

  friend bool operator==(const LabeledVoterGraph&, const LabeledVoterGraph&) = default;
  friend bool operator<(const LabeledVoterGraph& x, const LabeledVoterGraph& y) {
    if (x.labels != y.labels) return x.labels < y.labels;
    return x.pattern < y.pattern;
  }
};

/// The distinct arrangements of H on V(H) ordered slots: V(H)!/A(H) of them,
/// sorted. Placement on any label set of size V(H) maps slot k to the k-th
/// smallest label.
inline std::vector<VoterPattern> local_arrangements(const VoterPattern& h) {
  detail::require_searchable(h);
  const std::size_t v = h.vertex_count();
  std::vector<std::uint32_t> slot(v);  // slot[pattern vertex]
  std::iota(slot.begin(), slot.end(), 0u);
  std::vector<VoterPattern> out;
  do {
    std::vector<Opinion> ops(v);
    for (std::size_t i = 0; i < v; ++i) ops[slot[i]] = h.opinion(i);
    std::vector<VoterPattern::Edge> edges;
    for (auto [a, b] : h.edges()) edges.emplace_back(slot[a], slot[b]);
    out.push_back(build_pattern(std::move(ops), std::move(edges)));
  } while (std::next_permutation(slot.begin(), slot.end()));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Every element of G_S(H) exactly once, in sorted order.
inline std::vector<LabeledVoterGraph> enumerate_labeled_copies(std::span<const std::uint32_t> label_set,
                                                               const VoterPattern& h) {
  std::vector<std::uint32_t> labels(label_set.begin(), label_set.end());
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  if (labels.size() > kMaxEnumerationLabels)
    throw SizeLimitError("label set of size " + std::to_string(labels.size()) +
                         " exceeds the enumeration budget of " +
                         std::to_string(kMaxEnumerationLabels));
  const std::size_t v = h.vertex_count();
  const auto arrangements = local_arrangements(h);
  std::vector<LabeledVoterGraph> out;
  if (labels.size() < v) return out;
  // Lexicographic v-combinations via a selection mask.
  std::vector<bool> pick(labels.size(), false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(v), true);
  do {
    std::vector<std::uint32_t> chosen;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (pick[i]) chosen.push_back(labels[i]);
    for (const auto& local : arrangements) out.push_back({chosen, local});
  } while (std::prev_permutation(pick.begin(), pick.end()));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace voterdyn
