#pragma once

// Tube and robot parameter types, validation, the four reference systems and
// uniform domain randomization.
//
// Unit system used throughout the library: millimeters for length, radians
// for angles, newtons for force. Young's and shear moduli are kept in GPa as
// tabulated (1 GPa = 1e3 N/mm^2) and precurvature in 1/m; the accessors below
// convert into the working units.

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

namespace ctr {

using Rng = std::mt19937_64;

struct TubeParams {
  double length_total = 0.0;    // mm
  double length_curved = 0.0;   // mm, distal precurved section
  double inner_diameter = 0.0;  // mm
  double outer_diameter = 0.0;  // mm
  double youngs_modulus = 0.0;  // GPa
  double shear_modulus = 0.0;   // GPa
  double precurvature = 0.0;    // 1/m, planar

  double precurvature_per_mm() const { return precurvature * 1e-3; }
  bool operator==(const TubeParams&) const = default;
};

// Three nested tubes; index 0 is the innermost (longest) tube.
struct CtrSystem {
  std::array<TubeParams, 3> tubes{};
  int system_id = 0;
  std::string name;

  double length() const { return tubes[0].length_total; }
};

enum class TubeField : std::uint8_t {
  LengthTotal,
  LengthCurved,
  InnerDiameter,
  OuterDiameter,
  YoungsModulus,
  ShearModulus,
  Precurvature,
};
inline constexpr std::array<TubeField, 7> kAllTubeFields = {
    TubeField::LengthTotal,   TubeField::LengthCurved,  TubeField::InnerDiameter, TubeField::OuterDiameter,
    TubeField::YoungsModulus, TubeField::ShearModulus,  TubeField::Precurvature};

std::string to_string(TubeField f);
TubeField tube_field_from_string(const std::string& s);
double& field_ref(TubeParams& t, TubeField f);
double field_value(const TubeParams& t, TubeField f);

struct DomainRandomizationSpec {
  double fraction = 0.0;
  std::vector<TubeField> parameters{kAllTubeFields.begin(), kAllTubeFields.end()};
};

struct Violation {
  std::string field;    // e.g. "tubes[1].inner_diameter"
  std::string message;  // e.g. "inner_diameter < outer_diameter"
};

// Every violated invariant; empty means the system is valid.
std::vector<Violation> validate_system(const CtrSystem& sys);
std::vector<Violation> validate_tube(const TubeParams& tube, const std::string& prefix = "tube");
// Throws InvalidSystem listing all violations.
void require_valid(const CtrSystem& sys);

// E*I with I = pi/64 (OD^4 - ID^4); N*mm^2.
double bending_stiffness(const TubeParams& tube);
// G*J with J = 2*I; N*mm^2.
double torsional_stiffness(const TubeParams& tube);

inline constexpr int kRandomizeRetries = 100;

// Uniform perturbation p -> U[p(1-f), p(1+f)] of each selected parameter on
// every tube. Invalid draws are discarded and redrawn up to kRandomizeRetries
// times, after which RetriesExhausted is thrown.
CtrSystem randomize(const CtrSystem& sys, const DomainRandomizationSpec& spec, Rng& rng);

// Reference systems 0..3.
CtrSystem reference_system(int id);
std::vector<CtrSystem> reference_systems();

nlohmann::json to_json(const CtrSystem& sys);
CtrSystem system_from_json(const nlohmann::json& j);
CtrSystem load_system(const std::filesystem::path& path);
void save_system(const CtrSystem& sys, const std::filesystem::path& path);

}  // namespace ctr
