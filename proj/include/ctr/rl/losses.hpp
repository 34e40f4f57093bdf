#pragma once

// DDPG losses with analytic gradients, generic over the scalar type so the
// same code path is checked in double against finite differences.

#include <algorithm>

#include <Eigen/Dense>

#include "ctr/rl/mlp.hpp"

namespace ctr::rl {

template <typename Scalar>
struct BasicBatch {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  Matrix states;       // obs_dim x n (normalized)
  Matrix actions;      // 6 x n in [-1, 1]
  Row rewards;
  Matrix next_states;  // obs_dim x n (normalized)
  Row terminals;

  template <typename Other>
  BasicBatch<Other> cast() const {
    return {states.template cast<Other>(), actions.template cast<Other>(), rewards.template cast<Other>(),
            next_states.template cast<Other>(), terminals.template cast<Other>()};
  }
};

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> stack_rows(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& top,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& bottom) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

// Bootstrapped targets r + gamma (1 - terminal) Q'(s', mu'(s')), clipped to
// the reachable return range [-1/(1-gamma), 0].
template <typename Scalar>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> critic_targets(const Mlp<Scalar>& critic_target,
                                                        const Mlp<Scalar>& actor_target,
                                                        const BasicBatch<Scalar>& b, double gamma) {
  const auto next_actions = actor_target.forward(b.next_states);
  const auto q_next = critic_target.forward(stack_rows<Scalar>(b.next_states, next_actions));
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> y =
      b.rewards.array() + Scalar(gamma) * (Scalar(1) - b.terminals.array()) * q_next.row(0).array();
  const Scalar lo = Scalar(-1.0 / (1.0 - gamma));
  return y.cwiseMax(lo).cwiseMin(Scalar(0));
}

// Mean squared TD error against fixed targets; gradient w.r.t. critic params.
template <typename Scalar>
Scalar critic_loss(const Mlp<Scalar>& critic, const BasicBatch<Scalar>& b,
                   const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>& targets,
                   Eigen::Matrix<Scalar, Eigen::Dynamic, 1>* grad) {
  typename Mlp<Scalar>::Tape tape;
  const auto q = critic.forward(stack_rows<Scalar>(b.states, b.actions), grad ? &tape : nullptr);
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> diff = q.row(0) - targets;
  const Scalar n = Scalar(b.states.cols());
  if (grad) {
    grad->resize(0);
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> g = Scalar(2) * diff / n;
    critic.backward(tape, g, *grad);
  }
  return diff.squaredNorm() / n;
}

// -mean Q(s, mu(s)) + action_l2 * mean(mu(s)^2); gradient w.r.t. actor params.
template <typename Scalar>
Scalar actor_loss(const Mlp<Scalar>& actor, const Mlp<Scalar>& critic, const BasicBatch<Scalar>& b, double action_l2,
                  Eigen::Matrix<Scalar, Eigen::Dynamic, 1>* grad) {
  typename Mlp<Scalar>::Tape actor_tape, critic_tape;
  const auto actions = actor.forward(b.states, grad ? &actor_tape : nullptr);
  const auto q = critic.forward(stack_rows<Scalar>(b.states, actions), grad ? &critic_tape : nullptr);
  const Scalar n = Scalar(b.states.cols());
  const Scalar loss = -q.sum() / n + Scalar(action_l2) * actions.squaredNorm() / (n * Scalar(actions.rows()));
  if (grad) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dq =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Constant(1, b.states.cols(), Scalar(-1) / n);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> unused;
    const auto d_input = critic.backward(critic_tape, dq, unused, /*want_params=*/false);
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> d_actions = d_input.bottomRows(actions.rows());
    d_actions += Scalar(2 * action_l2) * actions / (n * Scalar(actions.rows()));
    grad->resize(0);
    actor.backward(actor_tape, d_actions, *grad);
  }
  return loss;
}

// target <- (1 - tau) target + tau source
template <typename Scalar>
void soft_update(Mlp<Scalar>& target, const Mlp<Scalar>& source, double tau) {
  target.params() = Scalar(1 - tau) * target.params() + Scalar(tau) * source.params();
}

}  // namespace ctr::rl
