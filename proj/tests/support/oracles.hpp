#pragma once

// Independent reference computations used by the unit and acceptance suites.
// None of these call into the kinematics implementation beyond the joint
// feasibility check.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "ctr/kinematics.hpp"
#include "ctr/systems.hpp"

namespace oracle {

struct TubeState {
  std::array<bool, 3> present{};
  std::array<bool, 3> curved{};
  bool operator==(const TubeState&) const = default;
};

// Which tubes cover arc length s (open interval semantics at the boundaries
// are irrelevant to the integral).
inline TubeState tubes_at(const ctr::CtrSystem& sys, const ctr::JointConfig& q, double s) {
  TubeState st;
  for (int i = 0; i < 3; ++i) {
    const double end = sys.tubes[i].length_total + q.beta[i];
    const double curve_start = end - sys.tubes[i].length_curved;
    st.present[i] = s < end;
    st.curved[i] = st.present[i] && s > curve_start;
  }
  return st;
}

inline double hand_stiffness(const ctr::TubeParams& t) {
  const double I = std::numbers::pi / 64.0 * (std::pow(t.outer_diameter, 4) - std::pow(t.inner_diameter, 4));
  return t.youngs_modulus * 1e3 * I;
}

// Bending-direction curvature vector at s for fixed tube angles.
inline Eigen::Vector2d curvature_at(const ctr::CtrSystem& sys, const TubeState& st, const Eigen::Vector3d& theta) {
  Eigen::Vector2d num = Eigen::Vector2d::Zero();
  double den = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (!st.present[i]) continue;
    const double K = hand_stiffness(sys.tubes[i]);
    den += K;
    if (st.curved[i]) {
      num += K * sys.tubes[i].precurvature * 1e-3 * Eigen::Vector2d(std::cos(theta[i]), std::sin(theta[i]));
    }
  }
  return den > 0.0 ? Eigen::Vector2d(num / den) : Eigen::Vector2d::Zero();
}

// Points where the tube coverage can change: every tube end and every start of
// a precurved section, clipped to [0, length]. Coverage between consecutive
// points is then read from tubes_at, so the integrator never trusts the
// library's segmentation.
inline std::vector<double> breakpoints(const ctr::CtrSystem& sys, const ctr::JointConfig& q, double length) {
  std::vector<double> out{0.0, length};
  for (int i = 0; i < 3; ++i) {
    const double end = sys.tubes[i].length_total + q.beta[i];
    for (double s : {end, end - sys.tubes[i].length_curved}) {
      if (s > 0.0 && s < length) out.push_back(s);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

// Rigid-tier tip by RK4 integration of p' = R e3, R' = R [u]x with steps no
// larger than h, restarting exactly at every coverage breakpoint.
inline Eigen::Vector3d dense_tip(const ctr::CtrSystem& sys, const ctr::JointConfig& q, double h = 0.01) {
  const double length = sys.tubes[0].length_total + q.beta[0];
  if (length <= 0.0) return Eigen::Vector3d::Zero();
  const auto bps = breakpoints(sys, q, length);
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (std::size_t k = 0; k + 1 < bps.size(); ++k) {
    const double a = bps[k], b = bps[k + 1];
    const auto st = tubes_at(sys, q, 0.5 * (a + b));
    const Eigen::Vector2d c = curvature_at(sys, st, q.alpha);
    const Eigen::Matrix3d U = hat(Eigen::Vector3d(-c.y(), c.x(), 0.0));
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / h)));
    const double dt = (b - a) / n;
    const Eigen::Vector3d e3 = Eigen::Vector3d::UnitZ();
    for (int i = 0; i < n; ++i) {
      // state (p, R); dR = R U, dp = R e3
      const Eigen::Matrix3d k1R = R * U;
      const Eigen::Vector3d k1p = R * e3;
      const Eigen::Matrix3d R2 = R + 0.5 * dt * k1R;
      const Eigen::Matrix3d k2R = R2 * U;
      const Eigen::Vector3d k2p = R2 * e3;
      const Eigen::Matrix3d R3 = R + 0.5 * dt * k2R;
      const Eigen::Matrix3d k3R = R3 * U;
      const Eigen::Vector3d k3p = R3 * e3;
      const Eigen::Matrix3d R4 = R + dt * k3R;
      const Eigen::Matrix3d k4R = R4 * U;
      const Eigen::Vector3d k4p = R4 * e3;
      p += dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
      R += dt / 6.0 * (k1R + 2 * k2R + 2 * k3R + k4R);
    }
  }
  return p;
}

// Segment boundaries by a plain linear scan at resolution h, rounded to h.
inline std::vector<double> scan_boundaries(const ctr::CtrSystem& sys, const ctr::JointConfig& q, double h = 0.01) {
  const double length = sys.tubes[0].length_total + q.beta[0];
  std::vector<double> out;
  if (length <= 0.0) return out;
  out.push_back(0.0);
  const int n = static_cast<int>(std::llround(length / h));
  TubeState prev = tubes_at(sys, q, 0.5 * h);
  for (int k = 1; k < n; ++k) {
    const TubeState cur = tubes_at(sys, q, (k + 0.5) * h);
    if (!(cur == prev)) out.push_back(k * h);
    prev = cur;
  }
  out.push_back(n * h);
  return out;
}

// Constant-curvature arc bending toward the rotated x-axis.
inline Eigen::Vector3d arc_tip(double kappa, double l, double alpha) {
  const double lateral = (1.0 - std::cos(kappa * l)) / kappa;
  return {std::cos(alpha) * lateral, std::sin(alpha) * lateral, std::sin(kappa * l) / kappa};
}

// Central finite-difference gradient of f at x.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                   double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1e-12, std::max(a.norm(), b.norm()));
}

}  // namespace oracle
