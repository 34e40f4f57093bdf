#include "ctr/control.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include "ctr/config.hpp"
#include "ctr/errors.hpp"

namespace ctr::control {

namespace {

Eigen::Vector3d vec3(const nlohmann::json& j, const std::string& key, const std::string& where) {
  const auto v = config::get<std::vector<double>>(j, key, where);
  if (v.size() != 3) throw ConfigError(where + "/" + key + ": expected 3 numbers");
  return {v[0], v[1], v[2]};
}

nlohmann::json vec3_json(const Eigen::Vector3d& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

PathShape shape_from_string(const std::string& s) {
  if (s == "line") return PathShape::Line;
  if (s == "circle") return PathShape::Circle;
  if (s == "helix") return PathShape::Helix;
  if (s == "polygon") return PathShape::Polygon;
  throw ConfigError("/shape: expected line|circle|helix|polygon, got '" + s + "'");
}

std::string to_string(PathShape s) {
  switch (s) {
    case PathShape::Line: return "line";
    case PathShape::Circle: return "circle";
    case PathShape::Helix: return "helix";
    case PathShape::Polygon: return "polygon";
  }
  return "?";
}

void validate(const PathSpec& s) {
  if (s.num_points < 2) throw InvalidSpec("path needs at least 2 points");
  auto finite = [](const Eigen::Vector3d& v) { return v.allFinite(); };
  switch (s.shape) {
    case PathShape::Line:
      if (!finite(s.start) || !finite(s.end)) throw InvalidSpec("line endpoints must be finite");
      break;
    case PathShape::Helix:
      if (!(s.pitch > 0.0) || !std::isfinite(s.pitch)) throw InvalidSpec("helix pitch must be positive");
      if (!(s.turns > 0.0) || !std::isfinite(s.turns)) throw InvalidSpec("helix turns must be positive");
      [[fallthrough]];
    case PathShape::Circle:
      if (!(s.radius > 0.0) || !std::isfinite(s.radius)) throw InvalidSpec("radius must be positive");
      if (!finite(s.center)) throw InvalidSpec("center must be finite");
      if (!finite(s.normal) || s.normal.norm() < 1e-12) throw InvalidSpec("normal must be a nonzero vector");
      break;
    case PathShape::Polygon: {
      if (s.vertices.size() < 2) throw InvalidSpec("polygon needs at least 2 vertices");
      double perimeter = 0.0;
      for (std::size_t i = 0; i < s.vertices.size(); ++i) {
        if (!finite(s.vertices[i])) throw InvalidSpec("polygon vertices must be finite");
        perimeter += (s.vertices[(i + 1) % s.vertices.size()] - s.vertices[i]).norm();
      }
      if (!(perimeter > 0.0)) throw InvalidSpec("polygon perimeter is zero");
      break;
    }
  }
}

// Orthonormal (u, v) spanning the plane normal to n.
std::pair<Eigen::Vector3d, Eigen::Vector3d> plane_basis(const Eigen::Vector3d& n) {
  const Eigen::Vector3d z = n.normalized();
  const Eigen::Vector3d seed = std::abs(z.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d u = (seed - seed.dot(z) * z).normalized();
  return {u, z.cross(u)};
}

}  // namespace

PathSpec path_spec_from_json(const nlohmann::json& j) {
  PathSpec s;
  s.shape = shape_from_string(config::get<std::string>(j, "shape", ""));
  s.num_points = config::get<int>(j, "num_points", "");
  switch (s.shape) {
    case PathShape::Line:
      s.start = vec3(j, "start", "");
      s.end = vec3(j, "end", "");
      break;
    case PathShape::Helix:
      s.pitch = config::get<double>(j, "pitch", "");
      s.turns = config::get<double>(j, "turns", "");
      [[fallthrough]];
    case PathShape::Circle:
      s.center = vec3(j, "center", "");
      s.radius = config::get<double>(j, "radius", "");
      if (j.contains("normal")) s.normal = vec3(j, "normal", "");
      break;
    case PathShape::Polygon:
      for (const auto& v : config::require(j, "vertices", "")) {
        const auto p = v.get<std::vector<double>>();
        if (p.size() != 3) throw ConfigError("/vertices: each vertex needs 3 numbers");
        s.vertices.emplace_back(p[0], p[1], p[2]);
      }
      break;
  }
  validate(s);
  return s;
}

nlohmann::json to_json(const PathSpec& s) {
  nlohmann::json j{{"shape", to_string(s.shape)}, {"num_points", s.num_points}};
  switch (s.shape) {
    case PathShape::Line:
      j["start"] = vec3_json(s.start);
      j["end"] = vec3_json(s.end);
      break;
    case PathShape::Helix:
      j["pitch"] = s.pitch;
      j["turns"] = s.turns;
      [[fallthrough]];
    case PathShape::Circle:
      j["center"] = vec3_json(s.center);
      j["radius"] = s.radius;
      j["normal"] = vec3_json(s.normal);
      break;
    case PathShape::Polygon: {
      nlohmann::json vs = nlohmann::json::array();
      for (const auto& v : s.vertices) vs.push_back(vec3_json(v));
      j["vertices"] = vs;
      break;
    }
  }
  return j;
}

PathSpec load_path_spec(const std::filesystem::path& path) { return path_spec_from_json(config::load_json(path)); }

std::vector<Eigen::Vector3d> generate_path(const PathSpec& s) {
  validate(s);
  const int n = s.num_points;
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(static_cast<std::size_t>(n));
  constexpr double two_pi = 2.0 * std::numbers::pi;
  switch (s.shape) {
    case PathShape::Line:
      for (int k = 0; k < n; ++k) {
        const double u = static_cast<double>(k) / (n - 1);
        pts.push_back(s.start + u * (s.end - s.start));
      }
      break;
    case PathShape::Circle: {
      const auto [u, v] = plane_basis(s.normal);
      for (int k = 0; k < n; ++k) {
        const double th = two_pi * k / n;
        pts.push_back(s.center + s.radius * (std::cos(th) * u + std::sin(th) * v));
      }
      break;
    }
    case PathShape::Helix: {
      const auto [u, v] = plane_basis(s.normal);
      const Eigen::Vector3d axis = s.normal.normalized();
      for (int k = 0; k < n; ++k) {
        const double f = static_cast<double>(k) / (n - 1);
        const double th = two_pi * s.turns * f;
        pts.push_back(s.center + s.radius * (std::cos(th) * u + std::sin(th) * v) + s.pitch * s.turns * f * axis);
      }
      break;
    }
    case PathShape::Polygon: {
      const std::size_t m = s.vertices.size();
      std::vector<double> cum{0.0};
      for (std::size_t i = 0; i < m; ++i) cum.push_back(cum.back() + (s.vertices[(i + 1) % m] - s.vertices[i]).norm());
      const double perimeter = cum.back();
      std::size_t edge = 0;
      for (int k = 0; k < n; ++k) {
        const double d = perimeter * k / n;
        while (edge + 1 < m && cum[edge + 1] <= d) ++edge;
        const double len = cum[edge + 1] - cum[edge];
        const double f = len > 0.0 ? (d - cum[edge]) / len : 0.0;
        pts.push_back(s.vertices[edge] + f * (s.vertices[(edge + 1) % m] - s.vertices[edge]));
      }
      break;
    }
  }
  return pts;
}

double TrackingResult::mean_error() const {
  if (waypoints.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& w : waypoints) sum += w.error;
  return sum / static_cast<double>(waypoints.size());
}

double TrackingResult::std_error() const {
  if (waypoints.empty()) return 0.0;
  const double m = mean_error();
  double ss = 0.0;
  for (const auto& w : waypoints) ss += (w.error - m) * (w.error - m);
  return std::sqrt(ss / static_cast<double>(waypoints.size()));
}

int TrackingResult::total_saturations() const {
  int n = 0;
  for (const auto& w : waypoints) n += w.saturations;
  return n;
}

int TrackingResult::total_steps() const {
  int n = 0;
  for (const auto& w : waypoints) n += w.steps;
  return n;
}

void write_tracking_csv(const TrackingResult& r, std::ostream& out) {
  out << "waypoint,dx,dy,dz,ax,ay,az,error,steps,clamped,saturations\n";
  const auto old = out.precision(12);
  for (std::size_t i = 0; i < r.waypoints.size(); ++i) {
    const auto& w = r.waypoints[i];
    out << i << "," << w.desired.x() << "," << w.desired.y() << "," << w.desired.z() << "," << w.achieved.x() << ","
        << w.achieved.y() << "," << w.achieved.z() << "," << w.error << "," << w.steps << "," << (w.clamped ? 1 : 0)
        << "," << w.saturations << "\n";
  }
  out.precision(old);
}

PolicyTracking policy_controller(const rl::Checkpoint& ck, const EnvConfig& env_cfg,
                                 const std::vector<Eigen::Vector3d>& waypoints, const JointConfig& q0,
                                 const PolicyControllerOptions& opts) {
  if (env_cfg.observation_dim() != ck.obs_dim) {
    throw IncompatibleCheckpoint("checkpoint expects observation dimension " + std::to_string(ck.obs_dim) +
                                 ", environment produces " + std::to_string(env_cfg.observation_dim()));
  }
  CtrEnv env(env_cfg);
  env.set_system(opts.system_index);
  env.set_fixed_tolerance(opts.tolerance);
  env.set_joints(q0);

  PolicyTracking out;
  for (const auto& goal : waypoints) {
    env.set_desired_goal(goal);
    env.begin_segment(opts.steps_per_waypoint);
    WaypointRecord rec;
    rec.desired = goal;
    if (env.error() > opts.tolerance) {
      while (!env.done()) {
        const ActionVector a = rl::act(ck, env.observation());
        out.actions.push_back(a);
        const StepResult r = env.step(a);
        ++rec.steps;
        rec.clamped = rec.clamped || r.info.clamped;
      }
    }
    rec.achieved = env.achieved_goal();
    rec.error = env.error();
    rec.q = env.joints();
    out.result.waypoints.push_back(rec);
  }
  return out;
}

Eigen::MatrixXd damped_pseudo_inverse(const Eigen::MatrixXd& J, double lambda) {
  const Eigen::Index n = J.cols();
  const Eigen::MatrixXd A = J.transpose() * J + lambda * lambda * Eigen::MatrixXd::Identity(n, n);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  const double rcond = ldlt.rcond();
  if (ldlt.info() != Eigen::Success || !(rcond > 1e-13)) {
    throw SingularUpdate("damped normal matrix is singular (rcond " + std::to_string(rcond) + ", lambda " +
                         std::to_string(lambda) + ")");
  }
  return ldlt.solve(J.transpose());
}

TrackingResult jacobian_controller(const CtrSystem& sys, const std::vector<Eigen::Vector3d>& waypoints,
                                   const JointConfig& q0, const JacobianGains& gains) {
  require_feasible(sys, q0);
  TrackingResult result;
  JointConfig q = q0;
  const Eigen::Matrix3d Kp = gains.kp.asDiagonal();
  const double interval = gains.iterations_per_waypoint * gains.dt;
  for (std::size_t w = 0; w < waypoints.size(); ++w) {
    const Eigen::Vector3d& xd = waypoints[w];
    const Eigen::Vector3d xd_dot =
        w + 1 < waypoints.size() ? Eigen::Vector3d((waypoints[w + 1] - xd) / interval) : Eigen::Vector3d::Zero();
    WaypointRecord rec;
    rec.desired = xd;
    for (int it = 0; it < gains.iterations_per_waypoint; ++it) {
      const Eigen::Vector3d x = tip_position(sys, q, gains.tier);
      const Jacobian J = jacobian(sys, q, gains.tier);
      const Eigen::Matrix<double, 6, 1> dq = gains.dt * damped_pseudo_inverse(J, gains.lambda) * (xd_dot + Kp * (xd - x));
      q.beta += dq.head<3>();
      q.alpha += dq.tail<3>();
      bool moved = project_extensions(sys, q.beta);
      if (gains.rotation_mode == RotationMode::Constrained) {
        const Eigen::Vector3d a = q.alpha.cwiseMax(-std::numbers::pi).cwiseMin(std::numbers::pi);
        moved = moved || a != q.alpha;
        q.alpha = a;
      }
      if (moved) {
        ++rec.saturations;
        rec.clamped = true;
      }
      ++rec.steps;
    }
    rec.achieved = tip_position(sys, q, gains.tier);
    rec.error = (rec.achieved - xd).norm();
    rec.q = q;
    result.waypoints.push_back(rec);
  }
  return result;
}

JointConfig home_joints(const CtrSystem& sys) {
  JointConfig q;
  q.alpha.setZero();
  q.beta.setZero();
  for (int j = 0; j < 3; ++j) {
    const auto [lo, hi] = extension_interval(sys, q.beta, j);
    q.beta[j] = 0.5 * (lo + hi);
  }
  return q;
}

IkSolveResult solve_ik_dls(const CtrSystem& sys, const Eigen::Vector3d& target, const JointConfig& q_init,
                           double lambda, int max_iterations, double tolerance) {
  require_feasible(sys, q_init);
  IkSolveResult out;
  out.q = q_init;
  Eigen::Vector3d x = tip_position(sys, out.q);
  for (; out.iterations < max_iterations && (target - x).norm() > tolerance; ++out.iterations) {
    Eigen::Vector3d dx = target - x;
    if (dx.norm() > 5.0) dx *= 5.0 / dx.norm();
    const Eigen::Matrix<double, 6, 1> dq = damped_pseudo_inverse(jacobian(sys, out.q), lambda) * dx;
    out.q.beta += dq.head<3>();
    out.q.alpha += dq.tail<3>();
    project_extensions(sys, out.q.beta);
    x = tip_position(sys, out.q);
  }
  out.error = (target - x).norm();
  return out;
}

JointConfig joints_from_flat(const std::vector<double>& v) {
  if (v.size() != 6) throw ConfigError("q0 expects 6 values: beta1 beta2 beta3 (mm) alpha1 alpha2 alpha3 (deg)");
  JointConfig q;
  q.beta << v[0], v[1], v[2];
  q.alpha << deg2rad(v[3]), deg2rad(v[4]), deg2rad(v[5]);
  return q;
}

JointConfig path_start_joints(const CtrSystem& sys, const nlohmann::json& path_json, const Eigen::Vector3d& first) {
  if (path_json.contains("q0")) {
    const auto q = joints_from_flat(config::get<std::vector<double>>(path_json, "q0", ""));
    require_feasible(sys, q);
    return q;
  }
  return solve_ik_dls(sys, first, home_joints(sys)).q;
}

}  // namespace ctr::control
