#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace ctxmod {

// Identifier-level lexical kernels. Characters compare case-insensitively
// (ASCII); lengths and counts are taken from the original strings and
// reconstructed witness strings are reported case-folded.

inline char fold_char(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string fold_case(const std::string& s) {
  std::string out(s);
  for (char& c : out) c = fold_char(c);
  return out;
}

// ---------------------------------------------------------------------------
// Longest common subsequence

inline std::string lcs_string(const std::string& a_raw, const std::string& b_raw) {
  std::string a = fold_case(a_raw), b = fold_case(b_raw);
  size_t n = a.size(), m = b.size();
  std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
  for (size_t i = 1; i <= n; ++i)
    for (size_t j = 1; j <= m; ++j)
      dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1
                                      : std::max(dp[i - 1][j], dp[i][j - 1]);
  std::string out;
  size_t i = n, j = m;
  while (i > 0 && j > 0) {
    if (a[i - 1] == b[j - 1] && dp[i][j] == dp[i - 1][j - 1] + 1) {
      out += a[i - 1];
      --i;
      --j;
    } else if (dp[i - 1][j] >= dp[i][j - 1]) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(out.begin(), out.end());
  return out;
}

inline size_t lcs_length(const std::string& a, const std::string& b) {
  return lcs_string(a, b).size();
}

inline double sim_lcs(const std::string& a, const std::string& b) {
  if (a.empty() || b.empty()) return 0.0;
  double len = static_cast<double>(lcs_length(a, b));
  return len * len / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

// ---------------------------------------------------------------------------
// Longest common substring

inline std::string lcu_string(const std::string& a_raw, const std::string& b_raw) {
  std::string a = fold_case(a_raw), b = fold_case(b_raw);
  size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  int best = 0;
  size_t best_end = 0;  // end index in a (exclusive)
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
      if (cur[j] > best) {
        best = cur[j];
        best_end = i;
      }
    }
    std::swap(prev, cur);
  }
  return a.substr(best_end - best, best);
}

inline size_t lcu_length(const std::string& a, const std::string& b) {
  return lcu_string(a, b).size();
}

inline double sim_lcu(const std::string& a, const std::string& b) {
  if (a.empty() || b.empty()) return 0.0;
  double len = static_cast<double>(lcu_length(a, b));
  return len * len / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

// ---------------------------------------------------------------------------
// Common substring count kernel: sum over all shared substrings s of
// num_s(a) * num_s(b), equal to the sum of longest-common-prefix lengths over
// all suffix pairs. Computed from a generalized suffix array in O(n log n).

namespace detail {

inline std::vector<int> suffix_array(const std::string& s) {
  int n = static_cast<int>(s.size());
  std::vector<int> sa(n), rank(n), tmp(n);
  std::iota(sa.begin(), sa.end(), 0);
  for (int i = 0; i < n; ++i) rank[i] = static_cast<unsigned char>(s[i]);
  for (int k = 1;; k <<= 1) {
    auto cmp = [&](int a, int b) {
      if (rank[a] != rank[b]) return rank[a] < rank[b];
      int ra = a + k < n ? rank[a + k] : -1;
      int rb = b + k < n ? rank[b + k] : -1;
      return ra < rb;
    };
    std::sort(sa.begin(), sa.end(), cmp);
    tmp[sa[0]] = 0;
    for (int i = 1; i < n; ++i) tmp[sa[i]] = tmp[sa[i - 1]] + (cmp(sa[i - 1], sa[i]) ? 1 : 0);
    rank = tmp;
    if (rank[sa[n - 1]] == n - 1) break;
  }
  return sa;
}

// Kasai: lcp[i] = longest common prefix of sa[i-1] and sa[i]; lcp[0] = 0.
inline std::vector<int> lcp_array(const std::string& s, const std::vector<int>& sa) {
  int n = static_cast<int>(s.size());
  std::vector<int> rank(n), lcp(n, 0);
  for (int i = 0; i < n; ++i) rank[sa[i]] = i;
  int h = 0;
  for (int i = 0; i < n; ++i) {
    if (rank[i] == 0) {
      h = 0;
      continue;
    }
    int j = sa[rank[i] - 1];
    while (i + h < n && j + h < n && s[i + h] == s[j + h]) ++h;
    lcp[rank[i]] = h;
    if (h > 0) --h;
  }
  return lcp;
}

}  // namespace detail

inline int64_t const_kernel_raw(const std::string& a_raw, const std::string& b_raw) {
  std::string a = fold_case(a_raw), b = fold_case(b_raw);
  if (a.empty() || b.empty()) return 0;
  std::string s = a + '\x01' + b;
  int n = static_cast<int>(s.size());
  int split = static_cast<int>(a.size());  // s[split] is the separator
  std::vector<int> sa = detail::suffix_array(s);
  std::vector<int> lcp = detail::lcp_array(s, sa);

  // Monotonic stack of (height, #a-suffixes, #b-suffixes); sum_a/sum_b track
  // the total min-lcp from all stacked suffixes to the incoming one.
  struct Slab {
    int64_t h, ca, cb;
  };
  std::vector<Slab> stack;
  int64_t sum_a = 0, sum_b = 0, total = 0;
  for (int r = 0; r < n; ++r) {
    int64_t h = r == 0 ? 0 : lcp[r];
    int64_t ca = 0, cb = 0;
    while (!stack.empty() && stack.back().h >= h) {
      sum_a -= stack.back().h * stack.back().ca;
      sum_b -= stack.back().h * stack.back().cb;
      ca += stack.back().ca;
      cb += stack.back().cb;
      stack.pop_back();
    }
    if (ca || cb) {
      stack.push_back({h, ca, cb});
      sum_a += h * ca;
      sum_b += h * cb;
    }
    int pos = sa[r];
    if (pos == split) continue;  // separator suffix
    bool from_a = pos < split;
    total += from_a ? sum_b : sum_a;
    int64_t cap = n - pos;  // upper bound; future lcp values clamp it
    stack.push_back({cap, from_a ? 1 : 0, from_a ? 0 : 1});
    if (from_a)
      sum_a += cap;
    else
      sum_b += cap;
  }
  return total;
}

inline double sim_const(const std::string& a, const std::string& b) {
  if (a.empty() || b.empty()) return 0.0;
  int64_t cross = const_kernel_raw(a, b);
  int64_t self_a = const_kernel_raw(a, a);
  int64_t self_b = const_kernel_raw(b, b);
  if (self_a == 0 || self_b == 0) return 0.0;
  return static_cast<double>(cross) /
         std::sqrt(static_cast<double>(self_a) * static_cast<double>(self_b));
}

enum class LexicalKernel { Lcs, Lcu, Const, None };

inline double lexical_similarity(LexicalKernel kind, const std::string& a,
                                 const std::string& b) {
  switch (kind) {
    case LexicalKernel::Lcs:
      return sim_lcs(a, b);
    case LexicalKernel::Lcu:
      return sim_lcu(a, b);
    case LexicalKernel::Const:
      return sim_const(a, b);
    case LexicalKernel::None:
      return 1.0;
  }
  return 1.0;
}

}  // namespace ctxmod
