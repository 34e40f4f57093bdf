#include "ctr/rl/replay_buffer.hpp"

#include "ctr/errors.hpp"

namespace ctr::rl {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim)
    : capacity_(capacity),
      obs_dim_(obs_dim),
      states_(obs_dim, static_cast<Eigen::Index>(capacity)),
      actions_(kActionDim, static_cast<Eigen::Index>(capacity)),
      next_states_(obs_dim, static_cast<Eigen::Index>(capacity)),
      goals_(7, static_cast<Eigen::Index>(capacity)),
      rewards_(static_cast<Eigen::Index>(capacity)),
      terminals_(static_cast<Eigen::Index>(capacity)) {
  if (capacity == 0) throw InvalidSpec("replay buffer capacity must be positive");
}

void ReplayBuffer::add(const Transition& t) {
  if (t.state.size() != obs_dim_ || t.next_state.size() != obs_dim_) {
    throw DimensionMismatch("transition state dimension " + std::to_string(t.state.size()) + " != buffer " +
                            std::to_string(obs_dim_));
  }
  const auto c = static_cast<Eigen::Index>(head_);
  states_.col(c) = t.state.cast<float>();
  actions_.col(c) = t.action.cast<float>();
  next_states_.col(c) = t.next_state.cast<float>();
  goals_.col(c).head<3>() = t.achieved_goal.cast<float>();
  goals_.col(c).segment<3>(3) = t.desired_goal.cast<float>();
  goals_(6, c) = static_cast<float>(t.tolerance);
  rewards_[c] = static_cast<float>(t.reward);
  terminals_[c] = t.terminal ? 1.0f : 0.0f;
  head_ = (head_ + 1) % capacity_;
  ++inserted_;
  if (size_ == capacity_) {
    ++evicted_;
  } else {
    ++size_;
  }
}

void ReplayBuffer::add_all(const std::vector<Transition>& ts) {
  for (const auto& t : ts) add(t);
}

Batch ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (size_ == 0) throw InvalidSpec("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  Batch b;
  const auto cols = static_cast<Eigen::Index>(n);
  b.states.resize(obs_dim_, cols);
  b.actions.resize(kActionDim, cols);
  b.next_states.resize(obs_dim_, cols);
  b.rewards.resize(cols);
  b.terminals.resize(cols);
  for (Eigen::Index k = 0; k < cols; ++k) {
    const auto i = static_cast<Eigen::Index>(pick(rng));
    b.states.col(k) = states_.col(i);
    b.actions.col(k) = actions_.col(i);
    b.next_states.col(k) = next_states_.col(i);
    b.rewards[k] = rewards_[i];
    b.terminals[k] = terminals_[i];
  }
  return b;
}

Transition ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw InvalidSpec("replay index out of range");
  const auto c = static_cast<Eigen::Index>((head_ + capacity_ - size_ + i) % capacity_);
  Transition t;
  t.state = states_.col(c).cast<double>();
  t.action = actions_.col(c).cast<double>();
  t.next_state = next_states_.col(c).cast<double>();
  t.achieved_goal = goals_.col(c).head<3>().cast<double>();
  t.desired_goal = goals_.col(c).segment<3>(3).cast<double>();
  t.tolerance = goals_(6, c);
  t.reward = rewards_[c];
  t.terminal = terminals_[c] != 0.0f;
  return t;
}

int sample_future_index(int t, int length, Rng& rng) {
  return std::uniform_int_distribution<int>(t, length - 1)(rng);
}

Transition relabel(const Transition& t, const Eigen::Vector3d& goal) {
  Transition out = t;
  const Eigen::Vector3d shift = t.desired_goal - goal;
  out.state.segment<3>(kGoalDeltaOffset) += shift;
  out.next_state.segment<3>(kGoalDeltaOffset) += shift;
  out.desired_goal = goal;
  out.reward = sparse_reward((t.achieved_goal - goal).norm(), t.tolerance);
  out.terminal = out.reward == 0.0;
  return out;
}

std::vector<Transition> her_relabel(const std::vector<Transition>& episode, int k, Rng& rng) {
  std::vector<Transition> out;
  out.reserve(episode.size() * static_cast<std::size_t>(k + 1));
  const int length = static_cast<int>(episode.size());
  for (int t = 0; t < length; ++t) {
    out.push_back(episode[t]);
    for (int j = 0; j < k; ++j) {
      const int future = sample_future_index(t, length, rng);
      out.push_back(relabel(episode[t], episode[future].achieved_goal));
    }
  }
  return out;
}

}  // namespace ctr::rl
