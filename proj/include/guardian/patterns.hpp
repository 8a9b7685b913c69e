// Copyright 2026 The Guardian Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Portable anchored-regex dialect plus the draft generalizer.
//
// The dialect is deliberately small so that any standard engine enforces
// emitted patterns identically: literals, escaped literals, '.', '\d',
// non-negated character classes, bounded repetition {m}/{m,n} (with {m,},
// '+', '*', '?' tolerated on input), and top-level alternation. No groups,
// no backreferences, no lookaround, no negated classes. Matching is always
// full-match (anchored).

#ifndef GUARDIAN_PATTERNS_HPP_
#define GUARDIAN_PATTERNS_HPP_

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "guardian/cluster.hpp"
#include "guardian/error.hpp"

namespace guardian {

// Escapes every character that carries meaning in the dialect (and in
// ECMAScript), so the result matches exactly the input string.
inline std::string escape_literal(std::string_view text) {
  static constexpr std::string_view kSpecials = R"(\^$.|?*+()[]{})";
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (kSpecials.find(c) != std::string_view::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

struct CharClass {
  // Sorted inclusive ranges; singles are degenerate ranges.
  std::vector<std::pair<char, char>> ranges;

  bool matches(char c) const {
    for (auto [lo, hi] : ranges) {
      if (c >= lo && c <= hi) return true;
    }
    return false;
  }
  char lowest() const { return ranges.front().first; }
  char highest() const { return ranges.back().second; }
};

struct PatternAtom {
  enum class Kind { kLiteral, kClass, kAny };
  Kind kind = Kind::kLiteral;
  char literal = '\0';
  CharClass char_class;
  int min_rep = 1;
  int max_rep = 1;  // -1 = unbounded

  bool matches(char c) const {
    switch (kind) {
      case Kind::kLiteral:
        return c == literal;
      case Kind::kClass:
        return char_class.matches(c);
      case Kind::kAny:
        return c != '\n' && c != '\r';
    }
    return false;
  }
};

struct PatternAlternative {
  std::vector<PatternAtom> atoms;
};

struct ParsedPattern {
  std::string source;
  std::vector<PatternAlternative> alternatives;
};

namespace internal {

inline CharClass parse_char_class(const std::string& src, std::size_t& i) {
  // src[i] is the '[' opener.
  CharClass cls;
  std::size_t start = i++;
  if (i < src.size() && src[i] == '^') {
    throw Error("pattern '" + src + "': negated character class unsupported");
  }
  bool closed = false;
  std::vector<char> pending;
  auto read_member = [&]() -> std::optional<char> {
    if (src[i] == '\\') {
      if (i + 1 >= src.size())
        throw Error("pattern '" + src + "': dangling escape in class");
      char e = src[i + 1];
      i += 2;
      if (e == 'd') {
        cls.ranges.emplace_back('0', '9');
        return std::nullopt;
      }
      if (e == 'n') return '\n';
      if (e == 't') return '\t';
      if (e == 'r') return '\r';
      if (std::isalnum(static_cast<unsigned char>(e)))
        throw Error("pattern '" + src + "': unsupported class escape \\" +
                    std::string(1, e));
      return e;
    }
    return src[i++];
  };
  while (i < src.size()) {
    if (src[i] == ']') {
      closed = true;
      ++i;
      break;
    }
    std::optional<char> lo = read_member();
    if (!lo.has_value()) continue;  // \d expanded directly
    if (i + 1 < src.size() && src[i] == '-' && src[i + 1] != ']') {
      ++i;  // consume '-'
      std::optional<char> hi = read_member();
      if (!hi.has_value())
        throw Error("pattern '" + src + "': range endpoint cannot be \\d");
      if (*hi < *lo)
        throw Error("pattern '" + src + "': inverted class range");
      cls.ranges.emplace_back(*lo, *hi);
    } else {
      cls.ranges.emplace_back(*lo, *lo);
    }
  }
  if (!closed)
    throw Error("pattern '" + src + "': unterminated class at index " +
                std::to_string(start));
  if (cls.ranges.empty())
    throw Error("pattern '" + src + "': empty character class");
  std::sort(cls.ranges.begin(), cls.ranges.end());
  return cls;
}

// Parses {m}, {m,n} or {m,} starting at '{'. Returns false if the braces do
// not form a quantifier at all (which we reject elsewhere as malformed).
inline bool parse_brace_quantifier(const std::string& src, std::size_t& i,
                                   int& min_rep, int& max_rep) {
  std::size_t j = i + 1;
  std::string first, second;
  while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j])))
    first.push_back(src[j++]);
  if (first.empty()) return false;
  if (j < src.size() && src[j] == '}') {
    min_rep = max_rep = std::stoi(first);
    i = j + 1;
    return true;
  }
  if (j >= src.size() || src[j] != ',') return false;
  ++j;
  while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j])))
    second.push_back(src[j++]);
  if (j >= src.size() || src[j] != '}') return false;
  min_rep = std::stoi(first);
  max_rep = second.empty() ? -1 : std::stoi(second);
  if (max_rep != -1 && max_rep < min_rep) return false;
  i = j + 1;
  return true;
}

}  // namespace internal

// Parses a pattern of the portable dialect. Throws Error naming the
// unsupported construct for anything outside it (groups, backreferences,
// lookaround, negated classes, unknown escapes).
inline ParsedPattern parse_pattern(const std::string& src) {
  ParsedPattern pat;
  pat.source = src;
  pat.alternatives.emplace_back();
  std::size_t i = 0;
  auto& alts = pat.alternatives;
  auto current = [&]() -> PatternAlternative& { return alts.back(); };

  while (i < src.size()) {
    char c = src[i];
    if (c == '|') {
      alts.emplace_back();
      ++i;
      continue;
    }
    if (c == '^') {
      if (!current().atoms.empty())
        throw Error("pattern '" + src + "': '^' only allowed at start");
      ++i;
      continue;
    }
    if (c == '$') {
      if (i + 1 != src.size() && src[i + 1] != '|')
        throw Error("pattern '" + src + "': '$' only allowed at end");
      ++i;
      continue;
    }
    if (c == '(' || c == ')') {
      throw Error("pattern '" + src + "': groups are not supported");
    }

    PatternAtom atom;
    if (c == '\\') {
      if (i + 1 >= src.size())
        throw Error("pattern '" + src + "': dangling escape");
      char e = src[i + 1];
      i += 2;
      if (e == 'd') {
        atom.kind = PatternAtom::Kind::kClass;
        atom.char_class.ranges.emplace_back('0', '9');
      } else if (e == 'n' || e == 't' || e == 'r') {
        atom.kind = PatternAtom::Kind::kLiteral;
        atom.literal = e == 'n' ? '\n' : (e == 't' ? '\t' : '\r');
      } else if (std::isalnum(static_cast<unsigned char>(e))) {
        throw Error("pattern '" + src + "': unsupported escape \\" +
                    std::string(1, e));
      } else {
        atom.kind = PatternAtom::Kind::kLiteral;
        atom.literal = e;
      }
    } else if (c == '[') {
      atom.kind = PatternAtom::Kind::kClass;
      atom.char_class = internal::parse_char_class(src, i);
    } else if (c == '.') {
      atom.kind = PatternAtom::Kind::kAny;
      ++i;
    } else if (c == '{') {
      throw Error("pattern '" + src + "': quantifier without an atom");
    } else if (c == '*' || c == '+' || c == '?') {
      throw Error("pattern '" + src + "': quantifier without an atom");
    } else {
      atom.kind = PatternAtom::Kind::kLiteral;
      atom.literal = c;
      ++i;
    }

    // Optional quantifier.
    if (i < src.size()) {
      char q = src[i];
      if (q == '{') {
        int lo = 0, hi = 0;
        if (!internal::parse_brace_quantifier(src, i, lo, hi))
          throw Error("pattern '" + src + "': malformed brace quantifier");
        atom.min_rep = lo;
        atom.max_rep = hi;
      } else if (q == '+') {
        atom.min_rep = 1;
        atom.max_rep = -1;
        ++i;
      } else if (q == '*') {
        atom.min_rep = 0;
        atom.max_rep = -1;
        ++i;
      } else if (q == '?') {
        atom.min_rep = 0;
        atom.max_rep = 1;
        ++i;
      }
    }
    current().atoms.push_back(std::move(atom));
  }
  return pat;
}

// A pattern validated against the dialect and compiled for matching.
struct CompiledPattern {
  std::string source;
  ParsedPattern parsed;
  std::regex engine;
};

inline CompiledPattern compile_pattern(const std::string& source) {
  CompiledPattern cp;
  cp.source = source;
  cp.parsed = parse_pattern(source);
  try {
    cp.engine.assign(source, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw Error("pattern '" + source + "' failed to compile: " + e.what());
  }
  return cp;
}

inline bool full_match(const CompiledPattern& p, const std::string& text) {
  return std::regex_match(text, p.engine);
}

// Accepted strings sampled from a parsed pattern: per alternative, the
// shortest and longest variants (unbounded repetition capped at min+2) with
// each class atom at its lowest and at its highest character. Used as the
// finite evidence set for subsumption checks.
inline std::vector<std::string> probe_strings(const ParsedPattern& pat) {
  std::vector<std::string> probes;
  std::set<std::string> seen;
  auto emit = [&](const std::string& s) {
    if (seen.insert(s).second) probes.push_back(s);
  };
  auto atom_char = [](const PatternAtom& a, bool high) -> char {
    switch (a.kind) {
      case PatternAtom::Kind::kLiteral:
        return a.literal;
      case PatternAtom::Kind::kClass:
        return high ? a.char_class.highest() : a.char_class.lowest();
      case PatternAtom::Kind::kAny:
        return high ? '~' : 'a';
    }
    return 'a';
  };
  for (const PatternAlternative& alt : pat.alternatives) {
    for (bool max_reps : {false, true}) {
      for (bool high : {false, true}) {
        std::string s;
        for (const PatternAtom& a : alt.atoms) {
          int reps = max_reps
                         ? (a.max_rep == -1 ? a.min_rep + 2 : a.max_rep)
                         : a.min_rep;
          s.append(static_cast<std::size_t>(reps), atom_char(a, high));
        }
        emit(s);
      }
    }
  }
  return probes;
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + cost});
      diag = up;
    }
  }
  return row[b.size()];
}

inline double normalized_edit_distance(std::string_view a, std::string_view b) {
  std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

namespace internal {

inline std::string common_prefix(const std::vector<std::string>& strings) {
  std::string p = strings.front();
  for (const std::string& s : strings) {
    std::size_t k = 0;
    while (k < p.size() && k < s.size() && p[k] == s[k]) ++k;
    p.resize(k);
  }
  return p;
}

inline std::string common_suffix(const std::vector<std::string>& strings) {
  std::string p = strings.front();
  for (const std::string& s : strings) {
    std::size_t k = 0;
    while (k < p.size() && k < s.size() &&
           p[p.size() - 1 - k] == s[s.size() - 1 - k])
      ++k;
    p = p.substr(p.size() - k);
  }
  return p;
}

// One draft for a group of similar strings: escaped LCP, abstracted middle,
// escaped LCS. Falls back to exact literals when the middles cannot be
// described by a dialect class (line terminators).
inline std::vector<std::string> group_pattern(
    const std::vector<std::string>& group) {
  bool all_equal = std::all_of(group.begin(), group.end(),
                               [&](const std::string& s) { return s == group.front(); });
  if (all_equal) return {escape_literal(group.front())};

  std::string lcp = common_prefix(group);
  std::vector<std::string> tails;
  tails.reserve(group.size());
  for (const std::string& s : group) tails.push_back(s.substr(lcp.size()));
  std::string lcs = common_suffix(tails);

  std::size_t min_mid = std::string::npos, max_mid = 0;
  bool all_digits = true, all_alpha = true, has_line_break = false;
  for (const std::string& tail : tails) {
    std::string mid = tail.substr(0, tail.size() - lcs.size());
    min_mid = std::min(min_mid, mid.size());
    max_mid = std::max(max_mid, mid.size());
    for (char c : mid) {
      unsigned char uc = static_cast<unsigned char>(c);
      if (!std::isdigit(uc)) all_digits = false;
      if (!std::isalpha(uc)) all_alpha = false;
      if (c == '\n' || c == '\r') has_line_break = true;
    }
  }
  if (has_line_break) {
    std::vector<std::string> literals;
    for (const std::string& s : group) literals.push_back(escape_literal(s));
    return literals;
  }
  std::string cls = all_digits ? "\\d" : (all_alpha ? "[A-Za-z]" : ".");
  std::string reps = min_mid == max_mid
                         ? "{" + std::to_string(min_mid) + "}"
                         : "{" + std::to_string(min_mid) + "," +
                               std::to_string(max_mid) + "}";
  return {escape_literal(lcp) + cls + reps + escape_literal(lcs)};
}

}  // namespace internal

// Draft generalization: strings are grouped by average-linkage hierarchical
// clustering under normalized edit distance (threshold 0.4); each group
// yields one affix-anchored pattern (or exact literals). Every input string
// full-matches at least one returned draft.
inline std::vector<std::string> draft_regexes(
    const std::vector<std::string>& strings) {
  if (strings.empty()) throw Error("draft_regexes requires >= 1 string");
  auto groups = agglomerate(
      strings.size(),
      [&](std::size_t i, std::size_t j) {
        return normalized_edit_distance(strings[i], strings[j]);
      },
      0.4);
  std::vector<std::string> drafts;
  std::set<std::string> seen;
  for (const auto& group : groups) {
    std::vector<std::string> members;
    members.reserve(group.size());
    for (std::size_t idx : group) members.push_back(strings[idx]);
    for (std::string& p : internal::group_pattern(members)) {
      if (seen.insert(p).second) drafts.push_back(std::move(p));
    }
  }
  return drafts;
}

// Evidence-based subsumption: `general` accepts every probe of `specific`
// plus every training string `specific` accepts. Approximate by design; the
// evidence set is the probe corpus plus the cluster's own samples.
inline bool probe_subsumes(const CompiledPattern& general,
                           const CompiledPattern& specific,
                           const std::vector<std::string>& training) {
  for (const std::string& probe : probe_strings(specific.parsed)) {
    if (!full_match(general, probe)) return false;
  }
  for (const std::string& s : training) {
    if (full_match(specific, s) && !full_match(general, s)) return false;
  }
  return true;
}

}  // namespace guardian

#endif  // GUARDIAN_PATTERNS_HPP_
