#include "doctest.h"

#include <cmath>
#include <numbers>

#include "ctr/jointspace.hpp"
#include "ctr/kinematics.hpp"

using namespace ctr;

TEST_CASE("trigonometric representation") {
  const auto r = to_trig(Eigen::Vector3d(std::numbers::pi / 2, 0.0, -std::numbers::pi / 2), Eigen::Vector3d(-3, -2, -1));
  CHECK(r.gamma[0].x() == doctest::Approx(0.0));
  CHECK(r.gamma[0].y() == doctest::Approx(1.0));
  CHECK(r.gamma[0].z() == -3);
  CHECK(r.gamma[1].x() == 1.0);
  CHECK(r.gamma[1].y() == 0.0);
  CHECK(r.gamma[1].z() == -2);
  CHECK(r.flat().size() == 9);

  Rng rng(1);
  std::uniform_real_distribution<double> u(-10 * std::numbers::pi, 10 * std::numbers::pi);
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Vector3d a(u(rng), u(rng), u(rng));
    const Eigen::Vector3d b(-3 * k, -2 * k, -k);
    const auto rep = to_trig(a, b);
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(rep.gamma[i].head<2>().squaredNorm() - 1.0) < 1e-12);
      CHECK(std::abs(std::remainder(rotation_from_trig(rep)[i] - a[i], 2 * std::numbers::pi)) < 1e-12);
    }
    CHECK(extension_from_trig(rep) == b);
  }
}

TEST_CASE("egocentric and proprioceptive frames") {
  const Eigen::Vector3d a(deg2rad(10), deg2rad(30), deg2rad(60));
  const Eigen::Vector3d ego = to_egocentric(a);
  CHECK(rad2deg(ego[0]) == doctest::Approx(10));
  CHECK(rad2deg(ego[1]) == doctest::Approx(20));
  CHECK(rad2deg(ego[2]) == doctest::Approx(30));
  CHECK(to_proprioceptive(Eigen::Vector3d::Zero()) == Eigen::Vector3d::Zero());

  Rng rng(2);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int k = 0; k < 1000; ++k) {
    JointConfig q;
    q.alpha = {u(rng), u(rng), u(rng)};
    q.beta = {u(rng), u(rng), u(rng)};
    const auto back = to_proprioceptive(to_egocentric(q));
    CHECK((back.alpha - q.alpha).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((back.beta - q.beta).cwiseAbs().maxCoeff() <= 1e-12);
  }
  JointConfig q;
  q.alpha = a;
  q.beta = {-5, -3, -1};
  CHECK(to_frame(q, JointFrame::Proprioceptive).alpha == q.alpha);
  CHECK(to_frame(q, JointFrame::Egocentric).beta == Eigen::Vector3d(-5, 2, 2));
}

TEST_CASE("action vector") {
  const auto lim = ActionVector::limits();
  CHECK(lim.values[0] == 1.0);
  CHECK(lim.values[3] == doctest::Approx(deg2rad(5)));
  Eigen::Matrix<double, 6, 1> u;
  u << 1, -1, 0.5, 1, -0.5, 0;
  const auto a = ActionVector::from_normalized(u);
  CHECK(a.within_limits());
  CHECK((a.normalized() - u).norm() < 1e-15);
  ActionVector big;
  big.values << 3, -3, 0, 1, -1, 0;
  CHECK(!big.within_limits());
  CHECK(big.clipped().within_limits());
  CHECK(big.clipped().values[0] == 1.0);
}

TEST_CASE("apply_action") {
  const auto s3 = reference_system(3);
  JointConfig q;
  q.beta = {-50, -40, -30};
  q.alpha = {deg2rad(179), 0, 0};
  SUBCASE("zero action") {
    const auto r = apply_action(q, ActionVector::zero(), RotationMode::Constrained, s3);
    CHECK(r.q.beta == q.beta);
    CHECK(r.q.alpha == q.alpha);
    CHECK(!r.clamped);
  }
  ActionVector a;
  a.values[3] = deg2rad(5);
  SUBCASE("constrained rotation clips at pi") {
    const auto r = apply_action(q, a, RotationMode::Constrained, s3);
    CHECK(rad2deg(r.q.alpha[0]) == doctest::Approx(180));
    CHECK(r.clamped);
  }
  SUBCASE("constraint-free rotation passes through") {
    const auto r = apply_action(q, a, RotationMode::ConstraintFree, s3);
    CHECK(rad2deg(r.q.alpha[0]) == doctest::Approx(184));
    CHECK(!r.clamped);
  }
  SUBCASE("oversized actions are clipped and flagged") {
    ActionVector huge;
    huge.values[0] = 10;
    const auto r = apply_action(q, huge, RotationMode::ConstraintFree, s3);
    CHECK(r.action_clipped);
    CHECK(r.q.beta[0] == doctest::Approx(-49));
  }
  SUBCASE("outputs stay feasible under random actions") {
    Rng rng(9);
    std::uniform_real_distribution<double> u(-1, 1);
    JointConfig cur = sample_valid_joints(s3, rng);
    for (int k = 0; k < 5000; ++k) {
      Eigen::Matrix<double, 6, 1> n;
      for (int i = 0; i < 6; ++i) n[i] = u(rng);
      cur = apply_action(cur, ActionVector::from_normalized(n * 1.5), RotationMode::ConstraintFree, s3).q;
      REQUIRE(is_feasible(s3, cur));
    }
  }
  SUBCASE("constraint-free: alpha and alpha + 2 pi give the same tip") {
    JointConfig q2 = q;
    q2.alpha[0] += 2 * std::numbers::pi;
    const auto r1 = apply_action(q, a, RotationMode::ConstraintFree, s3);
    const auto r2 = apply_action(q2, a, RotationMode::ConstraintFree, s3);
    CHECK((tip_position(s3, r1.q) - tip_position(s3, r2.q)).norm() < 1e-9);
  }
}

TEST_CASE("valid joint sampling") {
  for (const auto& sys : reference_systems()) {
    Rng rng(4);
    for (int k = 0; k < 20000; ++k) {
      const auto q = sample_valid_joints(sys, rng);
      REQUIRE(is_feasible(sys, q, 0.0));
      for (int i = 0; i < 3; ++i) {
        CHECK(q.beta[i] >= -sys.tubes[i].length_total);
        CHECK(q.beta[i] <= 0.0);
        CHECK(std::abs(q.alpha[i]) <= std::numbers::pi);
      }
    }
  }
  Rng a(8), b(8);
  for (int k = 0; k < 10; ++k) {
    const auto qa = sample_valid_joints(reference_system(2), a);
    const auto qb = sample_valid_joints(reference_system(2), b);
    CHECK(qa.beta == qb.beta);
    CHECK(qa.alpha == qb.alpha);
  }
}
