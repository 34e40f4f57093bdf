#include "ctr/jointspace.hpp"

#include <algorithm>
#include <cmath>

namespace ctr {

Eigen::Matrix<double, 9, 1> TrigJointRep::flat() const {
  Eigen::Matrix<double, 9, 1> v;
  for (int i = 0; i < 3; ++i) v.segment<3>(3 * i) = gamma[i];
  return v;
}

TrigJointRep to_trig(const Eigen::Vector3d& alpha, const Eigen::Vector3d& beta) {
  TrigJointRep rep;
  for (int i = 0; i < 3; ++i) rep.gamma[i] = Eigen::Vector3d(std::cos(alpha[i]), std::sin(alpha[i]), beta[i]);
  return rep;
}

Eigen::Vector3d rotation_from_trig(const TrigJointRep& rep) {
  Eigen::Vector3d a;
  for (int i = 0; i < 3; ++i) a[i] = std::atan2(rep.gamma[i][1], rep.gamma[i][0]);
  return a;
}

Eigen::Vector3d extension_from_trig(const TrigJointRep& rep) {
  return {rep.gamma[0][2], rep.gamma[1][2], rep.gamma[2][2]};
}

Eigen::Vector3d to_egocentric(const Eigen::Vector3d& x) { return {x[0], x[1] - x[0], x[2] - x[1]}; }

Eigen::Vector3d to_proprioceptive(const Eigen::Vector3d& x) { return {x[0], x[0] + x[1], x[0] + x[1] + x[2]}; }

JointConfig to_egocentric(const JointConfig& q) { return {to_egocentric(q.alpha), to_egocentric(q.beta)}; }

JointConfig to_proprioceptive(const JointConfig& ego) {
  return {to_proprioceptive(ego.alpha), to_proprioceptive(ego.beta)};
}

JointConfig to_frame(const JointConfig& q, JointFrame frame) {
  return frame == JointFrame::Egocentric ? to_egocentric(q) : q;
}

ActionVector ActionVector::limits() {
  ActionVector a;
  a.values << kMaxExtensionStep, kMaxExtensionStep, kMaxExtensionStep, kMaxRotationStep, kMaxRotationStep,
      kMaxRotationStep;
  return a;
}

ActionVector ActionVector::from_normalized(const Eigen::Matrix<double, 6, 1>& u) {
  ActionVector a;
  a.values = u.cwiseProduct(limits().values);
  return a;
}

Eigen::Matrix<double, 6, 1> ActionVector::normalized() const { return values.cwiseQuotient(limits().values); }

ActionVector ActionVector::clipped() const {
  const auto lim = limits().values;
  ActionVector a;
  a.values = values.cwiseMax(-lim).cwiseMin(lim);
  return a;
}

bool ActionVector::within_limits(double tol) const {
  return ((values.cwiseAbs() - limits().values).array() <= tol).all();
}

bool project_extensions(const CtrSystem& sys, Eigen::Vector3d& beta) {
  const Eigen::Vector3d before = beta;
  const double L1 = sys.tubes[0].length_total;
  const double L2 = sys.tubes[1].length_total;
  const double L3 = sys.tubes[2].length_total;
  beta[0] = std::clamp(beta[0], -L1, 0.0);
  beta[1] = std::clamp(beta[1], std::max(beta[0], -L2), std::min(0.0, L1 + beta[0] - L2));
  beta[2] = std::clamp(beta[2], std::max(beta[1], -L3), std::min(0.0, L2 + beta[1] - L3));
  return beta != before;
}

ApplyResult apply_action(const JointConfig& q, const ActionVector& a, RotationMode mode, const CtrSystem& sys) {
  ApplyResult r;
  const ActionVector c = a.clipped();
  r.action_clipped = c.values != a.values;
  r.q.beta = q.beta + c.values.head<3>();
  r.q.alpha = q.alpha + c.values.tail<3>();
  r.clamped = project_extensions(sys, r.q.beta);
  if (mode == RotationMode::Constrained) {
    const Eigen::Vector3d before = r.q.alpha;
    r.q.alpha = r.q.alpha.cwiseMax(-std::numbers::pi).cwiseMin(std::numbers::pi);
    r.clamped = r.clamped || r.q.alpha != before;
  }
  return r;
}

JointConfig sample_valid_joints(const CtrSystem& sys, Rng& rng, RotationMode) {
  const double L1 = sys.tubes[0].length_total;
  const double L2 = sys.tubes[1].length_total;
  const double L3 = sys.tubes[2].length_total;
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  JointConfig q;
  q.beta[0] = uniform(-L1, 0.0);
  q.beta[1] = uniform(std::max(q.beta[0], -L2), std::min(0.0, L1 + q.beta[0] - L2));
  q.beta[2] = uniform(std::max(q.beta[1], -L3), std::min(0.0, L2 + q.beta[1] - L3));
  for (int i = 0; i < 3; ++i) q.alpha[i] = uniform(-std::numbers::pi, std::numbers::pi);
  return q;
}

}  // namespace ctr
