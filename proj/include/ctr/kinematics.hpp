#pragma once

// Unloaded concentric-tube kinematics.
//
// Arc length s runs from the front plate (s = 0) to the tip of the innermost
// tube at s = L_1 + beta_1. Tube i is exposed on [0, L_i + beta_i]; its
// precurved section is the distal [max(0, L_i + beta_i - Lc_i), L_i + beta_i].
//
// Curvature is carried as a planar "bending direction" vector c = (c_x, c_y)
// in the local frame: a tube at rotation 0 bends toward local +x, so a single
// tube with curvature k and exposed length l ends at
// ((1 - cos kl)/k, 0, sin(kl)/k). The local frame is a zero-twist (Bishop)
// frame; tube rotations theta_i are measured relative to it.

#include <array>
#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ctr/systems.hpp"

namespace ctr {

struct JointConfig {
  Eigen::Vector3d alpha = Eigen::Vector3d::Zero();  // rad, at the actuator
  Eigen::Vector3d beta = Eigen::Vector3d::Zero();   // mm, <= 0
};

inline constexpr double kJointTolerance = 1e-9;

// Violated extension constraints (0 >= b3 >= b2 >= b1 and
// 0 <= L3+b3 <= L2+b2 <= L1+b1); empty when feasible.
std::vector<std::string> joint_violations(const CtrSystem& sys, const JointConfig& q, double tol = kJointTolerance);
bool is_feasible(const CtrSystem& sys, const JointConfig& q, double tol = kJointTolerance);
void require_feasible(const CtrSystem& sys, const JointConfig& q);

// Interval of beta_j (0-based) that keeps the configuration feasible with the
// other extensions held fixed.
std::pair<double, double> extension_interval(const CtrSystem& sys, const Eigen::Vector3d& beta, int j);

// Exposed length L_i + beta_i of every tube.
Eigen::Vector3d exposed_lengths(const CtrSystem& sys, const JointConfig& q);

struct Segment {
  double s_start = 0.0;
  double s_end = 0.0;
  std::array<bool, 3> present{};
  std::array<bool, 3> curved{};  // only meaningful where present

  double length() const { return s_end - s_start; }
};

// Throws InvalidJoints on infeasible q. Empty when every tube is retracted.
std::vector<Segment> segment_tubes(const CtrSystem& sys, const JointConfig& q);

// Stiffness-weighted bending-direction vector (1/mm) for tube rotations theta.
Eigen::Vector2d resultant_curvature(const CtrSystem& sys, const Segment& seg, const Eigen::Vector3d& theta);

enum class KinematicsTier { Rigid, TorsionallyCompliant };

struct BackboneShape {
  std::vector<double> s;
  std::vector<Eigen::Vector3d> points;  // points.front() is the origin
  Eigen::Vector3d tip = Eigen::Vector3d::Zero();
};

struct CompliantOptions {
  double step = 0.1;          // RK4 step, mm
  double tolerance = 1e-10;   // max |theta_i'(distal end)|, rad/mm
  int max_iterations = 60;
};

// Result of the twist boundary-value problem.
struct TorsionSolution {
  Eigen::Vector3d base_rates = Eigen::Vector3d::Zero();  // theta_i'(0)
  Eigen::Vector3d base_angles = Eigen::Vector3d::Zero(); // theta_i(0)
  double residual = 0.0;
  int iterations = 0;
};

TorsionSolution solve_torsion(const CtrSystem& sys, const JointConfig& q, const CompliantOptions& opts = {});

BackboneShape forward_kinematics(const CtrSystem& sys, const JointConfig& q,
                                 KinematicsTier tier = KinematicsTier::Rigid, int samples_per_segment = 10,
                                 const CompliantOptions& opts = {});

// Tip only; the rigid tier skips all sampling.
Eigen::Vector3d tip_position(const CtrSystem& sys, const JointConfig& q, KinematicsTier tier = KinematicsTier::Rigid,
                             const CompliantOptions& opts = {});

using Jacobian = Eigen::Matrix<double, 3, 6>;

inline constexpr double kJacobianStepBeta = 1e-3;   // mm
inline constexpr double kJacobianStepAlpha = 1e-3;  // rad

// Central differences of the tip w.r.t. (beta_1..3, alpha_1..3); extension
// perturbations are clamped to the feasible interval.
Jacobian jacobian(const CtrSystem& sys, const JointConfig& q, KinematicsTier tier = KinematicsTier::Rigid,
                  double step_beta = kJacobianStepBeta, double step_alpha = kJacobianStepAlpha);

// CSV with header "s,x,y,z".
void write_backbone_csv(const BackboneShape& shape, std::ostream& out);

}  // namespace ctr
