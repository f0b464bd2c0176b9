#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "qmarg/operator.hpp"

namespace qmarg {

struct Marginal {
  PartySubset parties;
  DensityMatrix state;
};

/// Marginal reductions over a common register shape. Party sets are distinct
/// and each state lives on the sub-shape its parties induce.
class MarginalSet {
 public:
  MarginalSet() = default;
  explicit MarginalSet(SystemShape shape) : shape_(std::move(shape)) {}
  MarginalSet(SystemShape shape, std::vector<Marginal> entries) : shape_(std::move(shape)) {
    for (auto& e : entries) add(std::move(e.parties), std::move(e.state));
  }

  void add(PartySubset parties, DensityMatrix state) {
    parties.validate_for(shape_);
    const auto expected = shape_.restrict(parties);
    if (!(state.shape() == expected)) {
      throw ShapeError("marginal on " + parties.to_string() + " has shape " +
                       state.shape().to_string() + ", expected " + expected.to_string());
    }
    for (const auto& e : entries_) {
      if (e.parties == parties) {
        throw ValidationError("duplicate party set " + parties.to_string());
      }
    }
    entries_.push_back({std::move(parties), std::move(state)});
  }

  const SystemShape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const Marginal& operator[](std::size_t i) const { return entries_.at(i); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  std::vector<PartySubset> subsets() const {
    std::vector<PartySubset> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.parties);
    return out;
  }

 private:
  SystemShape shape_;
  std::vector<Marginal> entries_;
};

/// Marginal family of a generator state: entry j is the reduction onto subsets[j].
inline MarginalSet marginals_of(const DensityMatrix& state, const std::vector<PartySubset>& subsets) {
  MarginalSet out(state.shape());
  for (const auto& j : subsets) {
    out.add(j, DensityMatrix::from_trusted(partial_trace(state, j)));
  }
  return out;
}

/// Every k-body marginal set to the maximally mixed state.
inline MarginalSet maximally_mixed_marginals(const SystemShape& shape, std::size_t k) {
  MarginalSet out(shape);
  for (const auto& j : k_subsets(shape.sites(), k)) {
    out.add(j, DensityMatrix::maximally_mixed(shape.restrict(j)));
  }
  return out;
}

}  // namespace qmarg
