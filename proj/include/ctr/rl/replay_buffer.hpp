#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ctr/env.hpp"
#include "ctr/rl/losses.hpp"
#include "ctr/systems.hpp"

namespace ctr::rl {

inline constexpr std::size_t kDefaultBufferCapacity = 500'000;

using Batch = BasicBatch<float>;

// Fixed-capacity FIFO of transitions stored column-wise in float.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int obs_dim);

  void add(const Transition& t);
  void add_all(const std::vector<Transition>& ts);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t inserted() const { return inserted_; }
  std::uint64_t evicted() const { return evicted_; }
  int obs_dim() const { return obs_dim_; }

  // Uniform with replacement.
  Batch sample(std::size_t n, Rng& rng) const;
  // i-th oldest stored transition (goals and tolerance included).
  Transition at(std::size_t i) const;

 private:
  std::size_t capacity_;
  int obs_dim_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
  std::uint64_t inserted_ = 0;
  std::uint64_t evicted_ = 0;
  Eigen::MatrixXf states_, actions_, next_states_, goals_;  // goals_: achieved(3), desired(3), tolerance
  Eigen::RowVectorXf rewards_, terminals_;
};

// Index of a future step of the same episode, uniform over [t, length - 1].
int sample_future_index(int t, int length, Rng& rng);

// Copy of `t` pursuing `goal`: goal deltas in both observations are shifted,
// and reward and terminal flag are recomputed at the recorded tolerance.
Transition relabel(const Transition& t, const Eigen::Vector3d& goal);

// Each transition followed by k copies relabeled with the achieved goal of a
// uniformly drawn future step ("future" strategy).
std::vector<Transition> her_relabel(const std::vector<Transition>& episode, int k, Rng& rng);

}  // namespace ctr::rl
