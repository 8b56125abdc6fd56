#ifndef SPINSTAR_TUPLE_INDEX_HPP
#define SPINSTAR_TUPLE_INDEX_HPP

// Strictly increasing site tuples labelling the basis states of one
// magnetization sector, their lexicographic ranking, and the add/remove
// maps through which the flip-flop coupling connects neighbouring sectors.
//
// Site labels are one-based (1..N). Ranks are zero-based.

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spinstar/error.hpp"

namespace spinstar {

using site_t = int;
using rank_t = std::uint64_t;

/// C(n, k), or nullopt when the result does not fit in 64 bits.
inline std::optional<std::uint64_t> checked_binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return std::uint64_t{0};
  k = std::min(k, n - k);
  __extension__ using u128 = unsigned __int128;
  u128 acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // acc * (n - k + i) / i stays exact: acc is C(n-k+i-1, i-1).
    acc = acc * (n - k + i) / i;
    if (acc > std::numeric_limits<std::uint64_t>::max()) return std::nullopt;
  }
  return static_cast<std::uint64_t>(acc);
}

/// checked_binomial that throws resource_error on overflow.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  auto v = checked_binomial(n, k);
  if (!v) {
    throw resource_error("binomial coefficient C(" + std::to_string(n) + ", " +
                         std::to_string(k) + ") overflows 64-bit range");
  }
  return *v;
}

class SpinTuple {
 public:
  SpinTuple() = default;
  SpinTuple(std::initializer_list<site_t> sites) : SpinTuple(std::vector<site_t>(sites)) {}
  explicit SpinTuple(std::vector<site_t> sites) : sites_(std::move(sites)) {
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      if (sites_[i] < 1) {
        throw validation_error("spin tuple: site label " + std::to_string(sites_[i]) +
                               " is below 1");
      }
      if (i > 0 && sites_[i] <= sites_[i - 1]) {
        throw validation_error("spin tuple: indices must be strictly increasing, got " +
                               to_string(sites_));
      }
    }
  }

  std::size_t size() const noexcept { return sites_.size(); }
  bool empty() const noexcept { return sites_.empty(); }
  site_t operator[](std::size_t i) const { return sites_[i]; }
  const std::vector<site_t>& sites() const noexcept { return sites_; }
  auto begin() const noexcept { return sites_.begin(); }
  auto end() const noexcept { return sites_.end(); }

  bool contains(site_t r) const { return std::binary_search(sites_.begin(), sites_.end(), r); }

  friend bool operator==(const SpinTuple&, const SpinTuple&) = default;

  /// Lexicographic order: equal up to position m-1, then smaller at m.
  friend bool operator<(const SpinTuple& lhs, const SpinTuple& rhs) {
    return std::lexicographical_compare(lhs.sites_.begin(), lhs.sites_.end(),
                                        rhs.sites_.begin(), rhs.sites_.end());
  }

  static std::string to_string(const std::vector<site_t>& sites) {
    std::string out = "(";
    for (std::size_t i = 0; i < sites.size(); ++i) {
      if (i) out += ",";
      out += std::to_string(sites[i]);
    }
    return out + ")";
  }
  std::string to_string() const { return to_string(sites_); }

  friend std::ostream& operator<<(std::ostream& os, const SpinTuple& t) {
    return os << t.to_string();
  }

 private:
  friend class SectorBasis;
  struct unchecked_tag {};
  SpinTuple(std::vector<site_t> sites, unchecked_tag) : sites_(std::move(sites)) {}

  std::vector<site_t> sites_;
};

/// All p-subsets of {1..N} in lexicographic order.
class SectorBasis {
 public:
  SectorBasis(site_t n_sites, site_t p) : n_(n_sites), p_(p) {
    if (n_sites < 0 || p < 0 || p > n_sites) {
      throw validation_error("sector basis: need 0 <= p <= N, got N=" + std::to_string(n_sites) +
                             ", p=" + std::to_string(p));
    }
    dim_ = binomial(static_cast<std::uint64_t>(n_), static_cast<std::uint64_t>(p_));
  }

  site_t sites() const noexcept { return n_; }
  site_t p() const noexcept { return p_; }
  rank_t dim() const noexcept { return dim_; }

  void check(const SpinTuple& t) const {
    if (static_cast<site_t>(t.size()) != p_) {
      throw validation_error("tuple " + t.to_string() + " has length " + std::to_string(t.size()) +
                             ", expected p=" + std::to_string(p_));
    }
    if (!t.empty() && t.sites().back() > n_) {
      throw validation_error("tuple " + t.to_string() + " has a site above N=" +
                             std::to_string(n_));
    }
  }

  /// Zero-based lexicographic position, via the combinatorial number system.
  rank_t rank(const SpinTuple& t) const {
    check(t);
    return rank_unchecked(t.sites());
  }

  rank_t rank_unchecked(const std::vector<site_t>& sites) const {
    // rank = C(N,p) - 1 - sum_k C(N - i_k, p - k + 1), k one-based.
    std::uint64_t tail = 0;
    for (std::size_t k = 0; k < sites.size(); ++k) {
      tail += binomial_saturating(static_cast<std::uint64_t>(n_ - sites[k]),
                                   static_cast<std::uint64_t>(p_) - k);
    }
    return dim_ - 1 - tail;
  }

  SpinTuple unrank(rank_t r) const {
    if (r >= dim_) {
      throw validation_error("rank " + std::to_string(r) + " out of range [0, " +
                             std::to_string(dim_) + ") for N=" + std::to_string(n_) +
                             ", p=" + std::to_string(p_));
    }
    std::vector<site_t> sites(static_cast<std::size_t>(p_));
    std::uint64_t rest = dim_ - 1 - r;
    // Greedy decomposition of rest in the combinatorial number system,
    // with c_k = N - i_k strictly decreasing.
    std::uint64_t c = static_cast<std::uint64_t>(n_);
    for (site_t k = 0; k < p_; ++k) {
      const std::uint64_t width = static_cast<std::uint64_t>(p_ - k);
      // Largest c' < c (c' >= width - 1) with C(c', width) <= rest.
      std::uint64_t cand = c - 1;
      while (binomial_saturating(cand, width) > rest) --cand;
      rest -= binomial_saturating(cand, width);
      sites[static_cast<std::size_t>(k)] = n_ - static_cast<site_t>(cand);
      c = cand;
    }
    return SpinTuple(std::move(sites), SpinTuple::unchecked_tag{});
  }

  SpinTuple first() const {
    std::vector<site_t> sites(static_cast<std::size_t>(p_));
    for (site_t k = 0; k < p_; ++k) sites[static_cast<std::size_t>(k)] = k + 1;
    return SpinTuple(std::move(sites), SpinTuple::unchecked_tag{});
  }

  /// Advances t to its lexicographic successor; false past the last tuple.
  bool next(std::vector<site_t>& sites) const {
    const auto p = static_cast<std::size_t>(p_);
    for (std::size_t k = p; k-- > 0;) {
      const site_t limit = n_ - static_cast<site_t>(p - 1 - k);
      if (sites[k] < limit) {
        ++sites[k];
        for (std::size_t j = k + 1; j < p; ++j) sites[j] = sites[j - 1] + 1;
        return true;
      }
    }
    return false;
  }

  /// Calls fn(rank, sites) for every tuple in rank order.
  template <typename Fn>
  void for_each(Fn&& fn) const {
    std::vector<site_t> sites = first().sites();
    rank_t r = 0;
    do {
      fn(r, static_cast<const std::vector<site_t>&>(sites));
      ++r;
    } while (r < dim_ && next(sites));
  }

 private:
  static std::uint64_t binomial_saturating(std::uint64_t n, std::uint64_t k) {
    // Every term that occurs in a valid rank is bounded by C(N, p).
    auto v = checked_binomial(n, k);
    return v ? *v : std::numeric_limits<std::uint64_t>::max();
  }

  site_t n_;
  site_t p_;
  rank_t dim_ = 0;
};

/// O_r: t with r inserted in order. Requires r not in t.
inline SpinTuple add_index(const SpinTuple& t, site_t r) {
  if (r < 1) throw validation_error("add_index: site " + std::to_string(r) + " is below 1");
  if (t.contains(r)) {
    throw validation_error("add_index: site " + std::to_string(r) + " already in " + t.to_string());
  }
  std::vector<site_t> out(t.sites());
  out.insert(std::upper_bound(out.begin(), out.end(), r), r);
  return SpinTuple(std::move(out));
}

/// delta_r: t with r removed. Requires r in t.
inline SpinTuple remove_index(const SpinTuple& t, site_t r) {
  if (!t.contains(r)) {
    throw validation_error("remove_index: site " + std::to_string(r) + " not in " + t.to_string());
  }
  std::vector<site_t> out(t.sites());
  out.erase(std::lower_bound(out.begin(), out.end(), r));
  return SpinTuple(std::move(out));
}

/// Sites of {1..n} not in t.
inline SpinTuple complement(const SpinTuple& t, site_t n_sites) {
  std::vector<site_t> out;
  out.reserve(static_cast<std::size_t>(n_sites) - std::min<std::size_t>(t.size(), n_sites));
  for (site_t j = 1; j <= n_sites; ++j) {
    if (!t.contains(j)) out.push_back(j);
  }
  return SpinTuple(std::move(out));
}

struct Neighbor {
  SpinTuple tuple;
  site_t added;    // r, not in the source tuple
  site_t removed;  // s, in the source tuple

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// All delta_s(O_r(t)) with r outside t and s inside t, ordered by (r, s).
/// Exactly p(N-p) entries, each differing from t in one element.
inline std::vector<Neighbor> off_diagonal_neighbors(const SpinTuple& t, const SectorBasis& basis) {
  basis.check(t);
  std::vector<Neighbor> out;
  out.reserve(t.size() * (static_cast<std::size_t>(basis.sites()) - t.size()));
  for (site_t r = 1; r <= basis.sites(); ++r) {
    if (t.contains(r)) continue;
    for (site_t s : t) {
      std::vector<site_t> swapped;
      swapped.reserve(t.size());
      for (site_t x : t) {
        if (x != s) swapped.push_back(x);
      }
      swapped.insert(std::upper_bound(swapped.begin(), swapped.end(), r), r);
      out.push_back({SpinTuple(std::move(swapped)), r, s});
    }
  }
  return out;
}

}  // namespace spinstar

#endif  // SPINSTAR_TUPLE_INDEX_HPP
