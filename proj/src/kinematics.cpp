#include "ctr/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "ctr/errors.hpp"

namespace ctr {

std::vector<std::string> joint_violations(const CtrSystem& sys, const JointConfig& q, double tol) {
  std::vector<std::string> out;
  const auto& b = q.beta;
  if (!b.allFinite() || !q.alpha.allFinite()) out.emplace_back("joint values must be finite");
  if (b[2] > tol) out.emplace_back("beta_3 <= 0");
  if (b[1] > b[2] + tol) out.emplace_back("beta_2 <= beta_3");
  if (b[0] > b[1] + tol) out.emplace_back("beta_1 <= beta_2");
  const Eigen::Vector3d exposed = exposed_lengths(sys, q);
  if (exposed[2] < -tol) out.emplace_back("L_3 + beta_3 >= 0");
  if (exposed[2] > exposed[1] + tol) out.emplace_back("L_3 + beta_3 <= L_2 + beta_2");
  if (exposed[1] > exposed[0] + tol) out.emplace_back("L_2 + beta_2 <= L_1 + beta_1");
  return out;
}

bool is_feasible(const CtrSystem& sys, const JointConfig& q, double tol) { return joint_violations(sys, q, tol).empty(); }

void require_feasible(const CtrSystem& sys, const JointConfig& q) {
  auto v = joint_violations(sys, q);
  if (v.empty()) return;
  std::string msg;
  for (const auto& s : v) msg += (msg.empty() ? "" : ", ") + s;
  throw InvalidJoints("violated: " + msg);
}

std::pair<double, double> extension_interval(const CtrSystem& sys, const Eigen::Vector3d& b, int j) {
  const double L1 = sys.tubes[0].length_total;
  const double L2 = sys.tubes[1].length_total;
  const double L3 = sys.tubes[2].length_total;
  switch (j) {
    case 0: return {L2 + b[1] - L1, b[1]};
    case 1: return {std::max(b[0], L3 + b[2] - L2), std::min(b[2], L1 + b[0] - L2)};
    case 2: return {std::max(b[1], -L3), std::min(0.0, L2 + b[1] - L3)};
    default: throw InvalidJoints("extension index out of range");
  }
}

Eigen::Vector3d exposed_lengths(const CtrSystem& sys, const JointConfig& q) {
  return {sys.tubes[0].length_total + q.beta[0], sys.tubes[1].length_total + q.beta[1],
          sys.tubes[2].length_total + q.beta[2]};
}

std::vector<Segment> segment_tubes(const CtrSystem& sys, const JointConfig& q) {
  require_feasible(sys, q);
  const Eigen::Vector3d exposed = exposed_lengths(sys, q).cwiseMax(0.0);
  std::vector<double> bounds{0.0};
  for (int i = 0; i < 3; ++i) {
    if (exposed[i] <= 0.0) continue;
    bounds.push_back(std::max(0.0, exposed[i] - sys.tubes[i].length_curved));
    bounds.push_back(exposed[i]);
  }
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

  std::vector<Segment> segs;
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
    Segment seg;
    seg.s_start = bounds[k];
    seg.s_end = bounds[k + 1];
    const double mid = 0.5 * (seg.s_start + seg.s_end);
    for (int i = 0; i < 3; ++i) {
      seg.present[i] = mid < exposed[i];
      seg.curved[i] = seg.present[i] && mid > exposed[i] - sys.tubes[i].length_curved;
    }
    segs.push_back(seg);
  }
  return segs;
}

namespace {

struct TubeConstants {
  std::array<double, 3> bend{};       // K_i, N mm^2
  std::array<double, 3> twist_ratio{};  // K_i / (G_i J_i)
  std::array<double, 3> kappa{};      // 1/mm
};

TubeConstants tube_constants(const CtrSystem& sys) {
  TubeConstants c;
  for (int i = 0; i < 3; ++i) {
    c.bend[i] = bending_stiffness(sys.tubes[i]);
    c.twist_ratio[i] = c.bend[i] / torsional_stiffness(sys.tubes[i]);
    c.kappa[i] = sys.tubes[i].precurvature_per_mm();
  }
  return c;
}

Eigen::Vector2d weighted_curvature(const TubeConstants& c, const Segment& seg, const Eigen::Vector3d& theta) {
  Eigen::Vector2d num = Eigen::Vector2d::Zero();
  double den = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (!seg.present[i]) continue;
    den += c.bend[i];
    if (seg.curved[i]) num += c.bend[i] * c.kappa[i] * Eigen::Vector2d(std::cos(theta[i]), std::sin(theta[i]));
  }
  return den > 0.0 ? Eigen::Vector2d(num / den) : Eigen::Vector2d::Zero();
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

constexpr double kSeriesCurvature = 1e-9;

// Constant-curvature arc of length l with bending-direction vector c,
// expressed in the frame at the arc start.
void arc_transform(const Eigen::Vector2d& c, double l, Eigen::Matrix3d& rot, Eigen::Vector3d& trans) {
  const double k = c.norm();
  if (k < kSeriesCurvature) {
    const Eigen::Vector3d omega(-c.y(), c.x(), 0.0);
    rot = Eigen::Matrix3d::Identity() + l * skew(omega);
    trans = Eigen::Vector3d(c.x() * l * l / 2.0, c.y() * l * l / 2.0, l);
    return;
  }
  const Eigen::Vector2d d = c / k;
  const double phi = k * l;
  rot = Eigen::AngleAxisd(phi, Eigen::Vector3d(-d.y(), d.x(), 0.0)).toRotationMatrix();
  const double lateral = (1.0 - std::cos(phi)) / k;
  trans = Eigen::Vector3d(d.x() * lateral, d.y() * lateral, std::sin(phi) / k);
}

BackboneShape rigid_shape(const CtrSystem& sys, const JointConfig& q, int samples) {
  const auto segs = segment_tubes(sys, q);
  const auto consts = tube_constants(sys);
  BackboneShape shape;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  if (samples > 0) {
    shape.s.push_back(0.0);
    shape.points.push_back(p);
  }
  Eigen::Matrix3d dR;
  Eigen::Vector3d dp;
  for (const auto& seg : segs) {
    const Eigen::Vector2d c = weighted_curvature(consts, seg, q.alpha);
    for (int k = 1; k <= samples; ++k) {
      const double l = seg.length() * k / samples;
      arc_transform(c, l, dR, dp);
      shape.s.push_back(seg.s_start + l);
      shape.points.push_back(p + R * dp);
    }
    arc_transform(c, seg.length(), dR, dp);
    p += R * dp;
    R = R * dR;
  }
  if (samples > 0 && !shape.points.empty()) shape.points.back() = p;
  shape.tip = p;
  return shape;
}

// Twist state along s: angles and rates of the three tubes.
struct TwistState {
  Eigen::Vector3d theta;
  Eigen::Vector3d rate;
};

struct FullState {
  TwistState twist;
  Eigen::Vector3d p;
  Eigen::Matrix3d R;
};

class TorsionProblem {
 public:
  TorsionProblem(const CtrSystem& sys, const JointConfig& q, const CompliantOptions& opts)
      : q_(q), opts_(opts), segs_(segment_tubes(sys, q)), c_(tube_constants(sys)) {
    const Eigen::Vector3d exposed = exposed_lengths(sys, q);
    for (int i = 0; i < 3; ++i) {
      if (exposed[i] > 0.0) active_.push_back(i);
    }
  }

  const std::vector<int>& active() const { return active_; }
  const std::vector<Segment>& segments() const { return segs_; }
  const TubeConstants& constants() const { return c_; }

  TwistState initial(const Eigen::Vector3d& rates) const {
    // straight transmission between the actuator (s = beta_i) and the plate
    TwistState st{q_.alpha - q_.beta.cwiseProduct(rates), rates};
    return st;
  }

  TwistState twist_derivative(const Segment& seg, const TwistState& st, Eigen::Vector2d* curvature) const {
    const Eigen::Vector2d c = weighted_curvature(c_, seg, st.theta);
    if (curvature) *curvature = c;
    TwistState d{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
    for (int i = 0; i < 3; ++i) {
      if (!seg.present[i]) continue;
      d.theta[i] = st.rate[i];
      if (seg.curved[i]) {
        d.rate[i] = c_.twist_ratio[i] * c_.kappa[i] * (c.x() * std::sin(st.theta[i]) - c.y() * std::cos(st.theta[i]));
      }
    }
    return d;
  }

  FullState derivative(const Segment& seg, const FullState& st) const {
    Eigen::Vector2d c;
    FullState d;
    d.twist = twist_derivative(seg, st.twist, &c);
    d.p = st.R.col(2);
    d.R = st.R * skew(Eigen::Vector3d(-c.y(), c.x(), 0.0));
    return d;
  }

  static TwistState axpy(const TwistState& a, double h, const TwistState& d) {
    return {a.theta + h * d.theta, a.rate + h * d.rate};
  }
  static FullState axpy(const FullState& a, double h, const FullState& d) {
    return {axpy(a.twist, h, d.twist), a.p + h * d.p, a.R + h * d.R};
  }

  template <typename State, typename Deriv>
  static State rk4(const State& y, double h, Deriv&& f) {
    const State k1 = f(y);
    const State k2 = f(axpy(y, h / 2, k1));
    const State k3 = f(axpy(y, h / 2, k2));
    const State k4 = f(axpy(y, h, k3));
    State out = axpy(y, h / 6, k1);
    out = axpy(out, h / 3, k2);
    out = axpy(out, h / 3, k3);
    return axpy(out, h / 6, k4);
  }

  int steps_for(const Segment& seg, int multiple) const {
    int n = std::max(1, static_cast<int>(std::ceil(seg.length() / opts_.step - 1e-9)));
    if (multiple > 1) n = multiple * ((n + multiple - 1) / multiple);
    return n;
  }

  // Distal twist rates of every active tube for the given base rates.
  Eigen::Vector3d distal_rates(const Eigen::Vector3d& base_rates) const {
    Eigen::Vector3d out = Eigen::Vector3d::Zero();
    TwistState st = initial(base_rates);
    for (std::size_t k = 0; k < segs_.size(); ++k) {
      const auto& seg = segs_[k];
      const int n = steps_for(seg, 1);
      const double h = seg.length() / n;
      auto f = [&](const TwistState& y) { return twist_derivative(seg, y, nullptr); };
      for (int s = 0; s < n; ++s) st = rk4(st, h, f);
      record_ends(k, st.rate, out);
    }
    return out;
  }

  void record_ends(std::size_t k, const Eigen::Vector3d& rate, Eigen::Vector3d& out) const {
    for (int i = 0; i < 3; ++i) {
      if (!segs_[k].present[i]) continue;
      if (k + 1 == segs_.size() || !segs_[k + 1].present[i]) out[i] = rate[i];
    }
  }

  double residual_norm(const Eigen::Vector3d& rates) const {
    const Eigen::Vector3d r = distal_rates(rates);
    double m = 0.0;
    for (int i : active_) m = std::max(m, std::abs(r[i]));
    return m;
  }

  TorsionSolution solve() const {
    TorsionSolution sol;
    const int m = static_cast<int>(active_.size());
    Eigen::Vector3d x = Eigen::Vector3d::Zero();
    auto residual_vec = [&](const Eigen::Vector3d& rates) {
      const Eigen::Vector3d full = distal_rates(rates);
      Eigen::VectorXd r(m);
      for (int a = 0; a < m; ++a) r[a] = full[active_[a]];
      return r;
    };
    Eigen::VectorXd r = residual_vec(x);
    int it = 0;
    for (; it < opts_.max_iterations && r.lpNorm<Eigen::Infinity>() > opts_.tolerance; ++it) {
      Eigen::MatrixXd J(m, m);
      for (int a = 0; a < m; ++a) {
        const double h = 1e-7 * std::max(1.0, std::abs(x[active_[a]]) * 1e3);
        Eigen::Vector3d xp = x;
        xp[active_[a]] += h;
        J.col(a) = (residual_vec(xp) - r) / h;
      }
      const Eigen::VectorXd dx = J.fullPivLu().solve(-r);
      if (!dx.allFinite()) break;
      double lambda = 1.0;
      bool improved = false;
      for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
        Eigen::Vector3d trial = x;
        for (int a = 0; a < m; ++a) trial[active_[a]] += lambda * dx[a];
        const Eigen::VectorXd rt = residual_vec(trial);
        if (rt.allFinite() && rt.norm() < r.norm()) {
          x = trial;
          r = rt;
          improved = true;
          break;
        }
      }
      if (!improved) break;
    }
    sol.base_rates = x;
    sol.base_angles = initial(x).theta;
    sol.residual = m > 0 ? r.lpNorm<Eigen::Infinity>() : 0.0;
    sol.iterations = it;
    if (!(sol.residual <= opts_.tolerance)) {
      throw ShootingNoConvergence("distal twist-rate residual " + std::to_string(sol.residual) + " rad/mm after " +
                                      std::to_string(it) + " iterations",
                                  sol.residual);
    }
    return sol;
  }

  BackboneShape shape(const TorsionSolution& sol, int samples) const {
    BackboneShape shape;
    FullState st{initial(sol.base_rates), Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity()};
    if (samples > 0) {
      shape.s.push_back(0.0);
      shape.points.push_back(st.p);
    }
    for (const auto& seg : segs_) {
      const int n = steps_for(seg, std::max(samples, 1));
      const int every = samples > 0 ? n / samples : n + 1;
      const double h = seg.length() / n;
      auto f = [&](const FullState& y) { return derivative(seg, y); };
      for (int s = 1; s <= n; ++s) {
        st = rk4(st, h, f);
        if (samples > 0 && s % every == 0) {
          shape.s.push_back(seg.s_start + h * s);
          shape.points.push_back(st.p);
        }
      }
      // keep R orthonormal against RK4 drift
      Eigen::JacobiSVD<Eigen::Matrix3d> svd(st.R, Eigen::ComputeFullU | Eigen::ComputeFullV);
      st.R = svd.matrixU() * svd.matrixV().transpose();
    }
    shape.tip = st.p;
    return shape;
  }

 private:
  JointConfig q_;
  CompliantOptions opts_;
  std::vector<Segment> segs_;
  TubeConstants c_;
  std::vector<int> active_;
};

}  // namespace

Eigen::Vector2d resultant_curvature(const CtrSystem& sys, const Segment& seg, const Eigen::Vector3d& theta) {
  return weighted_curvature(tube_constants(sys), seg, theta);
}

TorsionSolution solve_torsion(const CtrSystem& sys, const JointConfig& q, const CompliantOptions& opts) {
  return TorsionProblem(sys, q, opts).solve();
}

BackboneShape forward_kinematics(const CtrSystem& sys, const JointConfig& q, KinematicsTier tier,
                                 int samples_per_segment, const CompliantOptions& opts) {
  if (tier == KinematicsTier::Rigid) return rigid_shape(sys, q, samples_per_segment);
  TorsionProblem problem(sys, q, opts);
  return problem.shape(problem.solve(), samples_per_segment);
}

Eigen::Vector3d tip_position(const CtrSystem& sys, const JointConfig& q, KinematicsTier tier,
                             const CompliantOptions& opts) {
  return forward_kinematics(sys, q, tier, 0, opts).tip;
}

Jacobian jacobian(const CtrSystem& sys, const JointConfig& q, KinematicsTier tier, double step_beta,
                  double step_alpha) {
  require_feasible(sys, q);
  Jacobian J;
  for (int j = 0; j < 3; ++j) {
    const auto [lo, hi] = extension_interval(sys, q.beta, j);
    JointConfig plus = q, minus = q;
    plus.beta[j] = std::min(q.beta[j] + step_beta, hi);
    minus.beta[j] = std::max(q.beta[j] - step_beta, lo);
    const double span = plus.beta[j] - minus.beta[j];
    if (span <= 0.0) {
      J.col(j).setZero();
      continue;
    }
    J.col(j) = (tip_position(sys, plus, tier) - tip_position(sys, minus, tier)) / span;
  }
  for (int j = 0; j < 3; ++j) {
    JointConfig plus = q, minus = q;
    plus.alpha[j] += step_alpha;
    minus.alpha[j] -= step_alpha;
    J.col(3 + j) = (tip_position(sys, plus, tier) - tip_position(sys, minus, tier)) / (2.0 * step_alpha);
  }
  return J;
}

void write_backbone_csv(const BackboneShape& shape, std::ostream& out) {
  out << "s,x,y,z\n";
  out.precision(10);
  for (std::size_t k = 0; k < shape.points.size(); ++k) {
    const auto& p = shape.points[k];
    out << shape.s[k] << "," << p.x() << "," << p.y() << "," << p.z() << "\n";
  }
}

}  // namespace ctr
