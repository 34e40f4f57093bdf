#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "ctr/errors.hpp"
#include "ctr/systems.hpp"
#include "oracles.hpp"

using namespace ctr;

namespace {
bool has_message(const std::vector<Violation>& v, const std::string& msg) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.message == msg; });
}
}  // namespace

TEST_CASE("reference systems are valid and carry their tabulated values") {
  for (const auto& sys : reference_systems()) CHECK(validate_system(sys).empty());
  const auto s0 = reference_system(0);
  CHECK(s0.tubes[0].length_total == 431);
  CHECK(s0.tubes[1].length_total == 332);
  CHECK(s0.tubes[2].length_total == 174);
  CHECK(s0.tubes[0].outer_diameter == doctest::Approx(1.1));
  CHECK(s0.tubes[1].outer_diameter == doctest::Approx(1.8));
  CHECK(s0.tubes[2].outer_diameter == doctest::Approx(2.4));
  CHECK(s0.tubes[0].inner_diameter == doctest::Approx(0.7));
  CHECK(s0.tubes[1].inner_diameter == doctest::Approx(1.4));
  CHECK(s0.tubes[2].inner_diameter == doctest::Approx(2.0));
  CHECK(reference_system(3).length() == 150);
  CHECK_THROWS_AS(reference_system(4), InvalidSpec);
}

TEST_CASE("validation reports each broken invariant") {
  auto s = reference_system(0);
  s.tubes[0].length_total = 100;
  CHECK(has_message(validate_system(s), "lengths not decreasing"));

  auto d = reference_system(0);
  d.tubes[1].inner_diameter = d.tubes[1].outer_diameter;
  CHECK(has_message(validate_system(d), "inner_diameter < outer_diameter"));

  auto n = reference_system(0);
  n.tubes[0].outer_diameter = 1.5;  // exceeds the next tube's 1.4 mm bore
  const auto v = validate_system(n);
  REQUIRE(!v.empty());
  CHECK(v.front().field.find("tubes[0]") != std::string::npos);

  auto touching = reference_system(0);
  touching.tubes[0].outer_diameter = touching.tubes[1].inner_diameter;
  CHECK(validate_system(touching).empty());

  auto c = reference_system(1);
  c.tubes[2].length_curved = 0.0;
  CHECK(!validate_system(c).empty());
  CHECK_THROWS_AS(require_valid(c), InvalidSystem);
}

TEST_CASE("bending stiffness") {
  const auto t = reference_system(0).tubes[0];
  const double hand = 102.5e3 * std::numbers::pi / 64.0 * (std::pow(1.1, 4) - std::pow(0.7, 4));
  CHECK(bending_stiffness(t) == doctest::Approx(hand).epsilon(1e-14));
  CHECK(hand == doctest::Approx(6158.5033).epsilon(1e-8));

  auto doubled = t;
  doubled.youngs_modulus *= 2;
  CHECK(bending_stiffness(doubled) == doctest::Approx(2 * bending_stiffness(t)).epsilon(1e-15));

  auto degenerate = t;
  degenerate.inner_diameter = degenerate.outer_diameter;
  CHECK(bending_stiffness(degenerate) == 0.0);

  auto wider = t, thicker_bore = t;
  wider.outer_diameter += 0.1;
  thicker_bore.inner_diameter += 0.1;
  CHECK(bending_stiffness(wider) > bending_stiffness(t));
  CHECK(bending_stiffness(thicker_bore) < bending_stiffness(t));

  const double J = std::numbers::pi / 32.0 * (std::pow(1.1, 4) - std::pow(0.7, 4));
  CHECK(torsional_stiffness(t) == doctest::Approx(187.9e3 * J).epsilon(1e-14));
}

TEST_CASE("randomization") {
  const auto s0 = reference_system(0);
  Rng rng(42);
  SUBCASE("zero fraction is the identity") {
    DomainRandomizationSpec spec;
    spec.fraction = 0.0;
    for (const auto& sys : reference_systems()) {
      const auto r = randomize(sys, spec, rng);
      CHECK(r.tubes == sys.tubes);
    }
  }
  SUBCASE("draws stay within the declared interval and are reproducible") {
    DomainRandomizationSpec spec;
    spec.fraction = 0.05;
    double lo = 1e9, hi = -1e9;
    for (int k = 0; k < 2000; ++k) {
      const auto r = randomize(s0, spec, rng);
      lo = std::min(lo, r.tubes[0].inner_diameter);
      hi = std::max(hi, r.tubes[0].inner_diameter);
      CHECK(validate_system(r).empty());
    }
    CHECK(lo >= 0.665);
    CHECK(hi <= 0.735);
    CHECK(lo < 0.67);
    CHECK(hi > 0.73);
    Rng a(7), b(7);
    CHECK(randomize(s0, spec, a).tubes == randomize(s0, spec, b).tubes);
  }
  SUBCASE("only selected parameters move") {
    DomainRandomizationSpec spec;
    spec.fraction = 0.05;
    spec.parameters = {TubeField::Precurvature};
    const auto r = randomize(s0, spec, rng);
    for (int i = 0; i < 3; ++i) {
      CHECK(r.tubes[i].length_total == s0.tubes[i].length_total);
      CHECK(r.tubes[i].precurvature != s0.tubes[i].precurvature);
    }
  }
  SUBCASE("impossible constraints exhaust the retry budget") {
    auto tight = s0;
    tight.tubes[0].outer_diameter = tight.tubes[1].inner_diameter;  // any outward draw breaks nesting
    tight.tubes[1].outer_diameter = tight.tubes[2].inner_diameter;
    tight.tubes[0].length_total = tight.tubes[1].length_total + 1e-3;
    tight.tubes[1].length_total = tight.tubes[2].length_total + 1e-3;
    DomainRandomizationSpec spec;
    spec.fraction = 0.5;
    bool threw = false;
    for (int k = 0; k < 20 && !threw; ++k) {
      try {
        randomize(tight, spec, rng);
      } catch (const RetriesExhausted&) {
        threw = true;
      }
    }
    CHECK(threw);
  }
}

TEST_CASE("system files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "ctr_unit_systems";
  std::filesystem::create_directories(dir);
  for (const auto& sys : reference_systems()) {
    const auto p = dir / ("s" + std::to_string(sys.system_id) + ".json");
    save_system(sys, p);
    const auto back = load_system(p);
    CHECK(back.tubes == sys.tubes);
    CHECK(back.system_id == sys.system_id);
  }
  CHECK_THROWS_WITH_AS(load_system(dir / "missing.json"), doctest::Contains("file not found"), ConfigError);
}
