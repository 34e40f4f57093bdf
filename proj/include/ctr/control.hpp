#pragma once

// Path generation and the two trajectory-following controllers: the learned
// policy driven waypoint by waypoint, and damped-least-squares Jacobian control.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "ctr/env.hpp"
#include "ctr/kinematics.hpp"
#include "ctr/rl/ddpg.hpp"

namespace ctr::control {

enum class PathShape { Line, Circle, Helix, Polygon };

struct PathSpec {
  PathShape shape = PathShape::Line;
  int num_points = 2;
  // Line
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  Eigen::Vector3d end = Eigen::Vector3d::Zero();
  // Circle and Helix; the helix advances along `normal`.
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.0;
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double pitch = 0.0;  // mm per turn
  double turns = 1.0;
  // Polygon, closed.
  std::vector<Eigen::Vector3d> vertices;
};

PathSpec path_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PathSpec& spec);
PathSpec load_path_spec(const std::filesystem::path& path);

// Line: uniform interpolation including both endpoints. Circle: N angles
// 2*pi*k/N. Helix: N samples over `turns` turns, both ends included.
// Polygon: N points uniformly spaced along the closed perimeter from vertex 0.
std::vector<Eigen::Vector3d> generate_path(const PathSpec& spec);

struct WaypointRecord {
  Eigen::Vector3d desired = Eigen::Vector3d::Zero();
  Eigen::Vector3d achieved = Eigen::Vector3d::Zero();
  double error = 0.0;  // mm, noiseless
  int steps = 0;
  bool clamped = false;    // a joint limit was hit while pursuing this waypoint
  int saturations = 0;     // Jacobian controller: iterations whose update was projected
  JointConfig q;           // joints when leaving the waypoint
};

struct TrackingResult {
  std::vector<WaypointRecord> waypoints;

  double mean_error() const;
  double std_error() const;  // population std
  int total_saturations() const;
  int total_steps() const;
};

// waypoint,dx,dy,dz,ax,ay,az,error,steps,clamped,saturations
void write_tracking_csv(const TrackingResult& r, std::ostream& out);

inline constexpr int kPolicyStepsPerWaypoint = 20;
inline constexpr double kPolicySuccessTolerance = 1.0;  // mm

struct PolicyControllerOptions {
  int steps_per_waypoint = kPolicyStepsPerWaypoint;
  double tolerance = kPolicySuccessTolerance;
  int system_index = 0;
};

struct PolicyTracking {
  std::vector<ActionVector> actions;
  TrackingResult result;
};

// Drives the deterministic policy through `env_cfg`'s observation pipeline
// (noise included). A waypoint already within tolerance consumes no steps.
PolicyTracking policy_controller(const rl::Checkpoint& ck, const EnvConfig& env_cfg,
                                 const std::vector<Eigen::Vector3d>& waypoints, const JointConfig& q0,
                                 const PolicyControllerOptions& opts = {});

// (J^T J + lambda^2 I)^{-1} J^T. Throws SingularUpdate when the damped normal
// matrix cannot be factorized reliably.
Eigen::MatrixXd damped_pseudo_inverse(const Eigen::MatrixXd& J, double lambda);

struct JacobianGains {
  Eigen::Vector3d kp = Eigen::Vector3d::Constant(2.0);
  double lambda = 0.45;
  double dt = 0.1;
  int iterations_per_waypoint = 50;
  RotationMode rotation_mode = RotationMode::ConstraintFree;
  KinematicsTier tier = KinematicsTier::Rigid;
};

// q <- q + dt * J^+ [xd_dot + Kp (xd - x)], then projected onto the joint
// limits; every projection that moves the joints is counted as a saturation.
TrackingResult jacobian_controller(const CtrSystem& sys, const std::vector<Eigen::Vector3d>& waypoints,
                                   const JointConfig& q0, const JacobianGains& gains = {});

// Extensions at the midpoint of their sequential feasible intervals, rotations zero.
JointConfig home_joints(const CtrSystem& sys);

struct IkSolveResult {
  JointConfig q;
  double error = 0.0;
  int iterations = 0;
};

// Damped least-squares point IK with joint-limit projection; used to place a
// path's start configuration on its first waypoint.
IkSolveResult solve_ik_dls(const CtrSystem& sys, const Eigen::Vector3d& target, const JointConfig& q_init,
                           double lambda = 0.45, int max_iterations = 500, double tolerance = 1e-3);

// (beta1..3 in mm, alpha1..3 in deg) as written in path files and on the command line.
JointConfig joints_from_flat(const std::vector<double>& v);

// The path file's "q0" when present, otherwise DLS IK from home onto `first`.
JointConfig path_start_joints(const CtrSystem& sys, const nlohmann::json& path_json, const Eigen::Vector3d& first);

}  // namespace ctr::control
