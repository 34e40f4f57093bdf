#pragma once

// Joint representations, rotation modes, action application and sampling.

#include <array>
#include <numbers>

#include <Eigen/Dense>

#include "ctr/kinematics.hpp"
#include "ctr/systems.hpp"

namespace ctr {

inline constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

// (cos a_i, sin a_i, b_i) for each tube, stored tube-major.
struct TrigJointRep {
  std::array<Eigen::Vector3d, 3> gamma{};

  Eigen::Matrix<double, 9, 1> flat() const;
};

TrigJointRep to_trig(const Eigen::Vector3d& alpha, const Eigen::Vector3d& beta);
inline TrigJointRep to_trig(const JointConfig& q) { return to_trig(q.alpha, q.beta); }
Eigen::Vector3d rotation_from_trig(const TrigJointRep& rep);
Eigen::Vector3d extension_from_trig(const TrigJointRep& rep);

enum class RotationMode { Constrained, ConstraintFree };
enum class JointFrame { Proprioceptive, Egocentric };

// Adjacent differencing {x1, x2 - x1, x3 - x2}; no angle wrapping.
Eigen::Vector3d to_egocentric(const Eigen::Vector3d& x);
// Cumulative sum, the exact inverse of to_egocentric.
Eigen::Vector3d to_proprioceptive(const Eigen::Vector3d& x);
JointConfig to_egocentric(const JointConfig& q);
JointConfig to_proprioceptive(const JointConfig& ego);
JointConfig to_frame(const JointConfig& q, JointFrame frame);

inline constexpr double kMaxExtensionStep = 1.0;           // mm
inline constexpr double kMaxRotationStep = deg2rad(5.0);   // rad

// (d_beta_1..3, d_alpha_1..3) in mm and rad, per tube.
struct ActionVector {
  Eigen::Matrix<double, 6, 1> values = Eigen::Matrix<double, 6, 1>::Zero();

  static ActionVector zero() { return {}; }
  static ActionVector limits();
  // Maps [-1, 1]^6 onto the action limits.
  static ActionVector from_normalized(const Eigen::Matrix<double, 6, 1>& u);
  Eigen::Matrix<double, 6, 1> normalized() const;
  ActionVector clipped() const;
  bool within_limits(double tol = 1e-12) const;
};

struct ApplyResult {
  JointConfig q;
  bool action_clipped = false;  // the requested action exceeded the limits
  bool clamped = false;         // a joint limit was hit
};

// Sequential inner-to-outer clamp of the extensions onto the feasible set.
// Returns true if anything moved.
bool project_extensions(const CtrSystem& sys, Eigen::Vector3d& beta);

ApplyResult apply_action(const JointConfig& q, const ActionVector& a, RotationMode mode, const CtrSystem& sys);

// beta drawn by ordered construction (always feasible), alpha ~ U[-pi, pi].
JointConfig sample_valid_joints(const CtrSystem& sys, Rng& rng, RotationMode mode = RotationMode::ConstraintFree);

}  // namespace ctr
