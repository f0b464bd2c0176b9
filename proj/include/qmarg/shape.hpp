#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "qmarg/errors.hpp"

namespace qmarg {

class PartySubset;

/// Ordered local dimensions of a qudit register. Site 0 is the most
/// significant factor of the tensor index.
class SystemShape {
 public:
  SystemShape() = default;

  explicit SystemShape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    total_ = 1;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (dims_[i] < 2) {
        throw ShapeError("local dimension of site " + std::to_string(i) + " is " +
                         std::to_string(dims_[i]) + ", must be >= 2");
      }
      total_ *= dims_[i];
    }
  }

  static SystemShape uniform(std::size_t sites, std::size_t local_dim) {
    return SystemShape(std::vector<std::size_t>(sites, local_dim));
  }
  static SystemShape qubits(std::size_t sites) { return uniform(sites, 2); }

  std::size_t sites() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t site) const { return dims_.at(site); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t total_dim() const noexcept { return total_; }

  /// Shape induced on the sites of `subset`, in increasing site order.
  inline SystemShape restrict(const PartySubset& subset) const;

  /// Product of local dimensions over `subset`.
  inline std::size_t dim_of(const PartySubset& subset) const;

  friend bool operator==(const SystemShape& a, const SystemShape& b) {
    return a.dims_ == b.dims_;
  }

  std::string to_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(dims_[i]);
    }
    return s + "]";
  }

 private:
  std::vector<std::size_t> dims_;
  std::size_t total_ = 1;
};

/// Sorted set of site indices: the support of a marginal.
class PartySubset {
 public:
  PartySubset() = default;

  /// Accepts indices in any order; duplicates are rejected.
  explicit PartySubset(std::vector<std::size_t> indices) : idx_(std::move(indices)) {
    std::sort(idx_.begin(), idx_.end());
    if (std::adjacent_find(idx_.begin(), idx_.end()) != idx_.end()) {
      throw ValidationError("duplicate index in party subset");
    }
  }
  PartySubset(std::initializer_list<std::size_t> indices)
      : PartySubset(std::vector<std::size_t>(indices)) {}

  static PartySubset all(std::size_t sites) {
    std::vector<std::size_t> v(sites);
    std::iota(v.begin(), v.end(), std::size_t{0});
    PartySubset p;
    p.idx_ = std::move(v);
    return p;
  }

  const std::vector<std::size_t>& indices() const noexcept { return idx_; }
  std::size_t size() const noexcept { return idx_.size(); }
  bool empty() const noexcept { return idx_.empty(); }
  bool contains(std::size_t site) const {
    return std::binary_search(idx_.begin(), idx_.end(), site);
  }
  bool is_subset_of(const PartySubset& other) const {
    return std::includes(other.idx_.begin(), other.idx_.end(), idx_.begin(), idx_.end());
  }

  void validate_for(const SystemShape& shape) const {
    if (!idx_.empty() && idx_.back() >= shape.sites()) {
      throw ShapeError("site index " + std::to_string(idx_.back()) +
                       " out of range for shape with " + std::to_string(shape.sites()) +
                       " sites");
    }
  }

  PartySubset complement(std::size_t sites) const {
    PartySubset out;
    for (std::size_t s = 0; s < sites; ++s) {
      if (!contains(s)) out.idx_.push_back(s);
    }
    return out;
  }

  friend PartySubset intersect(const PartySubset& a, const PartySubset& b) {
    PartySubset out;
    std::set_intersection(a.idx_.begin(), a.idx_.end(), b.idx_.begin(), b.idx_.end(),
                          std::back_inserter(out.idx_));
    return out;
  }

  friend bool operator==(const PartySubset& a, const PartySubset& b) { return a.idx_ == b.idx_; }
  friend bool operator<(const PartySubset& a, const PartySubset& b) { return a.idx_ < b.idx_; }

  std::string to_string() const {
    std::string s = "{";
    for (std::size_t i = 0; i < idx_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(idx_[i]);
    }
    return s + "}";
  }

 private:
  std::vector<std::size_t> idx_;
};

inline SystemShape SystemShape::restrict(const PartySubset& subset) const {
  subset.validate_for(*this);
  std::vector<std::size_t> d;
  d.reserve(subset.size());
  for (auto s : subset.indices()) d.push_back(dims_[s]);
  return SystemShape(std::move(d));
}

inline std::size_t SystemShape::dim_of(const PartySubset& subset) const {
  subset.validate_for(*this);
  std::size_t d = 1;
  for (auto s : subset.indices()) d *= dims_[s];
  return d;
}

/// All k-element subsets of {0..n-1} in lexicographic order.
inline std::vector<PartySubset> k_subsets(std::size_t n, std::size_t k) {
  std::vector<PartySubset> out;
  if (k > n) return out;
  std::vector<std::size_t> cur(k);
  std::iota(cur.begin(), cur.end(), std::size_t{0});
  while (true) {
    out.emplace_back(cur);
    std::size_t i = k;
    while (i > 0 && cur[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++cur[i - 1];
    for (std::size_t j = i; j < k; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

}  // namespace qmarg
