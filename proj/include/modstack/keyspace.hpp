#pragma once

// Hierarchical key expressions.
//
// A key expression is a '/'-separated list of chunks. A chunk is a literal
// token, `*` (exactly one chunk) or `**` (zero or more chunks). Matching is
// byte-wise and case-sensitive. Concrete keys (no wildcards) always have at
// least one chunk.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "modstack/error.hpp"

namespace modstack {

inline constexpr std::string_view kSingleWild = "*";
inline constexpr std::string_view kMultiWild = "**";

class KeyExpr {
 public:
  KeyExpr() = default;

  static KeyExpr parse(std::string_view text) {
    if (text.empty()) throw Error(Errc::EmptyKey, "key expression is empty");
    KeyExpr out;
    std::size_t start = 0;
    while (true) {
      const auto slash = text.find('/', start);
      const auto chunk = text.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start);
      if (chunk.empty()) throw Error(Errc::EmptyChunk, "empty chunk in '" + std::string(text) + "'");
      if (!(chunk == kMultiWild && !out.chunks_.empty() && out.chunks_.back() == kMultiWild)) {
        out.chunks_.emplace_back(chunk);
      }
      if (slash == std::string_view::npos) break;
      start = slash + 1;
    }
    return out;
  }

  /// Builds a key from pre-split chunks, applying the same validation as parse().
  static KeyExpr from_chunks(const std::vector<std::string>& chunks) {
    if (chunks.empty()) throw Error(Errc::EmptyKey, "key expression has no chunks");
    KeyExpr out;
    for (const auto& c : chunks) {
      if (c.empty()) throw Error(Errc::EmptyChunk, "empty chunk");
      if (c.find('/') != std::string::npos) throw Error(Errc::EmptyChunk, "chunk contains '/': " + c);
      if (c == kMultiWild && !out.chunks_.empty() && out.chunks_.back() == kMultiWild) continue;
      out.chunks_.push_back(c);
    }
    return out;
  }

  const std::vector<std::string>& chunks() const noexcept { return chunks_; }
  std::size_t size() const noexcept { return chunks_.size(); }
  bool empty() const noexcept { return chunks_.empty(); }

  bool is_concrete() const noexcept {
    return std::none_of(chunks_.begin(), chunks_.end(),
                        [](const std::string& c) { return c == kSingleWild || c == kMultiWild; });
  }

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
      if (i) out.push_back('/');
      out += chunks_[i];
    }
    return out;
  }

  /// Appends chunks parsed from `suffix`.
  KeyExpr operator/(std::string_view suffix) const {
    return KeyExpr::parse(str() + "/" + std::string(suffix));
  }

  friend bool operator==(const KeyExpr&, const KeyExpr&) = default;
  friend auto operator<=>(const KeyExpr& a, const KeyExpr& b) { return a.chunks_ <=> b.chunks_; }

 private:
  std::vector<std::string> chunks_;
};

inline KeyExpr parse_keyexpr(std::string_view text) { return KeyExpr::parse(text); }

namespace detail {

// Position set of a pattern automaton: state i means "i chunks consumed".
// A dynamic bitset keeps patterns of any length usable.
class StateSet {
 public:
  explicit StateSet(std::size_t states = 0) : words_((states + 63) / 64, 0) {}
  void set(std::size_t i) { words_[i / 64] |= (std::uint64_t{1} << (i % 64)); }
  bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1u; }
  bool none() const {
    return std::all_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w == 0; });
  }
  friend auto operator<=>(const StateSet&, const StateSet&) = default;
  friend bool operator==(const StateSet&, const StateSet&) = default;

 private:
  std::vector<std::uint64_t> words_;
};

class PatternAutomaton {
 public:
  explicit PatternAutomaton(const KeyExpr& k) : chunks_(k.chunks()) {}

  std::size_t accept() const { return chunks_.size(); }

  StateSet start() const {
    StateSet s(chunks_.size() + 1);
    s.set(0);
    return closure(std::move(s));
  }

  // `symbol == nullopt` stands for a chunk distinct from every literal in play.
  StateSet step(const StateSet& from, const std::optional<std::string>& symbol) const {
    StateSet out(chunks_.size() + 1);
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
      if (!from.test(i)) continue;
      const auto& c = chunks_[i];
      if (c == kMultiWild) {
        out.set(i);
      } else if (c == kSingleWild || (symbol && c == *symbol)) {
        out.set(i + 1);
      }
    }
    return closure(std::move(out));
  }

 private:
  StateSet closure(StateSet s) const {
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
      if (s.test(i) && chunks_[i] == kMultiWild) s.set(i + 1);
    }
    return s;
  }

  const std::vector<std::string>& chunks_;
};

inline std::vector<std::optional<std::string>> symbolic_alphabet(const KeyExpr& a, const KeyExpr& b) {
  std::set<std::string> literals;
  for (const auto* k : {&a, &b}) {
    for (const auto& c : k->chunks()) {
      if (c != kSingleWild && c != kMultiWild) literals.insert(c);
    }
  }
  std::vector<std::optional<std::string>> out(literals.begin(), literals.end());
  out.emplace_back(std::nullopt);
  return out;
}

}  // namespace detail

/// True iff the concrete key `key` is matched by `pattern`.
inline bool matches(const KeyExpr& pattern, const KeyExpr& key) {
  const auto& p = pattern.chunks();
  const auto& k = key.chunks();
  // reachable[i]: pattern prefix of length i matches the key prefix consumed so far
  std::vector<char> reachable(p.size() + 1, 0), next(p.size() + 1, 0);
  auto close = [&](std::vector<char>& r) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (r[i] && p[i] == kMultiWild) r[i + 1] = 1;
    }
  };
  reachable[0] = 1;
  close(reachable);
  for (const auto& chunk : k) {
    std::fill(next.begin(), next.end(), 0);
    bool any = false;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!reachable[i]) continue;
      if (p[i] == kMultiWild) {
        next[i] = 1;
        any = true;
      } else if (p[i] == kSingleWild || p[i] == chunk) {
        next[i + 1] = 1;
        any = true;
      }
    }
    if (!any) return false;
    close(next);
    reachable.swap(next);
  }
  return !k.empty() && reachable[p.size()];
}

/// True iff some concrete key is matched by both expressions. Symmetric.
inline bool intersects(const KeyExpr& a, const KeyExpr& b) {
  if (a.is_concrete()) return b.is_concrete() ? a == b : matches(b, a);
  if (b.is_concrete()) return matches(a, b);

  const detail::PatternAutomaton na(a), nb(b);
  const auto alphabet = detail::symbolic_alphabet(a, b);
  using State = std::tuple<detail::StateSet, detail::StateSet, bool>;
  std::set<State> seen;
  std::vector<State> frontier{{na.start(), nb.start(), false}};
  seen.insert(frontier.front());
  while (!frontier.empty()) {
    auto [sa, sb, started] = std::move(frontier.back());
    frontier.pop_back();
    if (started && sa.test(na.accept()) && sb.test(nb.accept())) return true;
    for (const auto& sym : alphabet) {
      auto ta = na.step(sa, sym);
      if (ta.none()) continue;
      auto tb = nb.step(sb, sym);
      if (tb.none()) continue;
      State next{std::move(ta), std::move(tb), true};
      if (seen.insert(next).second) frontier.push_back(std::move(next));
    }
  }
  return false;
}

/// True iff every concrete key matched by `b` is also matched by `a`.
inline bool includes(const KeyExpr& a, const KeyExpr& b) {
  if (b.is_concrete()) return matches(a, b);
  if (a.is_concrete()) return false;  // b has a wildcard, so it matches more than one key

  const detail::PatternAutomaton na(a), nb(b);
  const auto alphabet = detail::symbolic_alphabet(a, b);
  using State = std::tuple<detail::StateSet, detail::StateSet, bool>;
  std::set<State> seen;
  std::vector<State> frontier{{na.start(), nb.start(), false}};
  seen.insert(frontier.front());
  while (!frontier.empty()) {
    auto [sa, sb, started] = std::move(frontier.back());
    frontier.pop_back();
    if (started && sb.test(nb.accept()) && !sa.test(na.accept())) return false;
    for (const auto& sym : alphabet) {
      auto tb = nb.step(sb, sym);
      if (tb.none()) continue;
      State next{na.step(sa, sym), std::move(tb), true};
      if (seen.insert(next).second) frontier.push_back(std::move(next));
    }
  }
  return true;
}

}  // namespace modstack

template <>
struct std::hash<modstack::KeyExpr> {
  std::size_t operator()(const modstack::KeyExpr& k) const noexcept { return std::hash<std::string>{}(k.str()); }
};
