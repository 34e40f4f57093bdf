#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "ctr/control.hpp"
#include "ctr/errors.hpp"

using namespace ctr;
using namespace ctr::control;

TEST_CASE("path generation") {
  SUBCASE("line includes both ends") {
    PathSpec s;
    s.shape = PathShape::Line;
    s.num_points = 5;
    s.start = {0, 0, 0};
    s.end = {4, 8, 0};
    const auto p = generate_path(s);
    REQUIRE(p.size() == 5);
    CHECK(p.front() == s.start);
    CHECK((p.back() - s.end).norm() < 1e-12);
    CHECK((p[1] - Eigen::Vector3d(1, 2, 0)).norm() < 1e-12);
  }
  SUBCASE("circle") {
    PathSpec s;
    s.shape = PathShape::Circle;
    s.num_points = 8;
    s.center = {10, 0, 100};
    s.radius = 5;
    const auto p = generate_path(s);
    REQUIRE(p.size() == 8);
    for (const auto& x : p) {
      CHECK((x - s.center).norm() == doctest::Approx(5.0));
      CHECK(x.z() == doctest::Approx(100.0));
    }
    for (std::size_t i = 1; i < p.size(); ++i) {
      CHECK((p[i] - p[i - 1]).norm() == doctest::Approx(2 * 5 * std::sin(std::numbers::pi / 8)));
    }
  }
  SUBCASE("helix") {
    PathSpec s;
    s.shape = PathShape::Helix;
    s.num_points = 100;
    s.center = {0, 0, 50};
    s.radius = 3;
    s.pitch = 10;
    s.turns = 2;
    const auto p = generate_path(s);
    REQUIRE(p.size() == 100);
    CHECK(p.front().z() == doctest::Approx(50));
    CHECK(p.back().z() == doctest::Approx(70));
    for (const auto& x : p) CHECK(x.head<2>().norm() == doctest::Approx(3.0));
  }
  SUBCASE("polygon spacing along the perimeter") {
    PathSpec s;
    s.shape = PathShape::Polygon;
    s.num_points = 8;
    s.vertices = {{0, 0, 0}, {2, 0, 0}, {2, 2, 0}, {0, 2, 0}};
    const auto p = generate_path(s);
    REQUIRE(p.size() == 8);
    const std::vector<Eigen::Vector3d> expected{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {2, 1, 0},
                                                {2, 2, 0}, {1, 2, 0}, {0, 2, 0}, {0, 1, 0}};
    for (std::size_t i = 0; i < 8; ++i) CHECK((p[i] - expected[i]).norm() < 1e-12);
  }
  SUBCASE("invalid specs") {
    PathSpec s;
    s.num_points = 0;
    CHECK_THROWS_AS(generate_path(s), InvalidSpec);
    s.shape = PathShape::Circle;
    s.num_points = 10;
    s.radius = -1;
    CHECK_THROWS_AS(generate_path(s), InvalidSpec);
    s.shape = PathShape::Polygon;
    CHECK_THROWS_AS(generate_path(s), InvalidSpec);
  }
  SUBCASE("json round trip") {
    PathSpec s;
    s.shape = PathShape::Helix;
    s.num_points = 30;
    s.center = {1, 2, 3};
    s.radius = 4;
    s.pitch = 2;
    s.turns = 1.5;
    const auto back = path_spec_from_json(to_json(s));
    CHECK(generate_path(back) == generate_path(s));
    CHECK_THROWS_AS(path_spec_from_json({{"shape", "spiral"}, {"num_points", 3}}), ConfigError);
  }
}

TEST_CASE("damped pseudo-inverse") {
  Eigen::Matrix3d A;
  A << 2, 1, 0, 0, 3, 1, 1, 0, 4;
  SUBCASE("zero damping on a square matrix is the inverse") {
    CHECK((damped_pseudo_inverse(A, 0.0) - A.inverse()).norm() < 1e-12);
  }
  SUBCASE("matches the closed form") {
    Eigen::MatrixXd J = Eigen::MatrixXd::Random(3, 6);
    const double l = 0.45;
    const Eigen::MatrixXd ref =
        (J.transpose() * J + l * l * Eigen::MatrixXd::Identity(6, 6)).inverse() * J.transpose();
    CHECK((damped_pseudo_inverse(J, l) - ref).norm() < 1e-10);
  }
  SUBCASE("norm decreases with damping") {
    Eigen::MatrixXd J = Eigen::MatrixXd::Random(3, 6);
    double prev = 1e300;
    for (double l : {0.1, 0.5, 1.0, 5.0, 50.0}) {
      const double n = damped_pseudo_inverse(J, l).norm();
      CHECK(n < prev);
      prev = n;
    }
  }
  SUBCASE("singular without damping") {
    CHECK_THROWS_AS(damped_pseudo_inverse(Eigen::MatrixXd::Zero(3, 6), 0.0), SingularUpdate);
  }
}

TEST_CASE("joint-space helpers") {
  for (const auto& sys : reference_systems()) {
    const auto home = home_joints(sys);
    CHECK(is_feasible(sys, home));
    CHECK(home.alpha.norm() == 0.0);
    Rng rng(3);
    const auto goal = sample_valid_joints(sys, rng);
    const Eigen::Vector3d target = tip_position(sys, goal);
    const auto ik = solve_ik_dls(sys, target, home);
    CHECK(is_feasible(sys, ik.q));
    CHECK(ik.error == doctest::Approx((tip_position(sys, ik.q) - target).norm()));
  }
}

TEST_CASE("jacobian controller") {
  const auto sys = reference_system(0);
  const auto q0 = home_joints(sys);
  const Eigen::Vector3d start = tip_position(sys, q0);
  SUBCASE("holding a reachable point") {
    const auto r = jacobian_controller(sys, {start}, q0);
    REQUIRE(r.waypoints.size() == 1);
    CHECK(r.waypoints[0].error < 1e-9);
  }
  SUBCASE("short line stays feasible and converges") {
    const std::vector<Eigen::Vector3d> wps{start, start + Eigen::Vector3d(2, 1, -3), start + Eigen::Vector3d(4, 2, -6)};
    const auto r = jacobian_controller(sys, wps, q0);
    REQUIRE(r.waypoints.size() == 3);
    for (const auto& w : r.waypoints) {
      CHECK(is_feasible(sys, w.q));
      CHECK(w.steps == 50);
    }
    CHECK(r.waypoints.back().error < 1.0);
    std::ostringstream out;
    write_tracking_csv(r, out);
    CHECK(out.str().rfind("waypoint,dx,dy,dz,ax,ay,az,error,steps,clamped,saturations\n", 0) == 0);
  }
  SUBCASE("unreachable target saturates") {
    const auto r = jacobian_controller(sys, {Eigen::Vector3d(0, 0, 1000)}, q0);
    CHECK(r.total_saturations() > 0);
    CHECK(is_feasible(sys, r.waypoints[0].q));
  }
}

TEST_CASE("tracking statistics") {
  TrackingResult r;
  for (double e : {1.0, 2.0, 3.0}) {
    WaypointRecord w;
    w.error = e;
    w.steps = 2;
    w.saturations = 1;
    r.waypoints.push_back(w);
  }
  CHECK(r.mean_error() == doctest::Approx(2.0));
  CHECK(r.std_error() == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(r.total_steps() == 6);
  CHECK(r.total_saturations() == 3);
}
