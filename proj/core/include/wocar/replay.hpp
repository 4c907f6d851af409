#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "wocar/losses.hpp"

namespace wocar {

/// Fixed-capacity ring buffer of transitions with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t inserted() const { return inserted_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }

  /// Indices drawn uniformly with replacement over the current contents.
  std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64& rng) const;
  std::vector<Transition> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::uint64_t inserted_ = 0;
};

}  // namespace wocar
