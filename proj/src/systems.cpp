#include "ctr/systems.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "ctr/config.hpp"
#include "ctr/errors.hpp"

namespace ctr {

std::string to_string(TubeField f) {
  switch (f) {
    case TubeField::LengthTotal: return "length_total";
    case TubeField::LengthCurved: return "length_curved";
    case TubeField::InnerDiameter: return "inner_diameter";
    case TubeField::OuterDiameter: return "outer_diameter";
    case TubeField::YoungsModulus: return "youngs_modulus";
    case TubeField::ShearModulus: return "shear_modulus";
    case TubeField::Precurvature: return "precurvature";
  }
  return "?";
}

TubeField tube_field_from_string(const std::string& s) {
  for (auto f : kAllTubeFields) {
    if (to_string(f) == s) return f;
  }
  throw ConfigError("unknown tube parameter '" + s + "'");
}

double& field_ref(TubeParams& t, TubeField f) {
  switch (f) {
    case TubeField::LengthTotal: return t.length_total;
    case TubeField::LengthCurved: return t.length_curved;
    case TubeField::InnerDiameter: return t.inner_diameter;
    case TubeField::OuterDiameter: return t.outer_diameter;
    case TubeField::YoungsModulus: return t.youngs_modulus;
    case TubeField::ShearModulus: return t.shear_modulus;
    case TubeField::Precurvature: return t.precurvature;
  }
  return t.length_total;
}

double field_value(const TubeParams& t, TubeField f) { return field_ref(const_cast<TubeParams&>(t), f); }

std::vector<Violation> validate_tube(const TubeParams& t, const std::string& prefix) {
  std::vector<Violation> out;
  auto add = [&](const char* field, const char* msg) { out.push_back({prefix + "." + field, msg}); };
  for (auto f : kAllTubeFields) {
    if (!std::isfinite(field_value(t, f))) add(to_string(f).c_str(), "value must be finite");
  }
  if (!(t.length_curved > 0.0)) add("length_curved", "0 < length_curved");
  if (!(t.length_curved <= t.length_total)) add("length_curved", "length_curved <= length_total");
  if (!(t.inner_diameter > 0.0)) add("inner_diameter", "0 < inner_diameter");
  if (!(t.inner_diameter < t.outer_diameter)) add("inner_diameter", "inner_diameter < outer_diameter");
  if (!(t.youngs_modulus > 0.0)) add("youngs_modulus", "youngs_modulus > 0");
  if (!(t.shear_modulus > 0.0)) add("shear_modulus", "shear_modulus > 0");
  if (!(t.precurvature >= 0.0)) add("precurvature", "precurvature >= 0");
  return out;
}

std::vector<Violation> validate_system(const CtrSystem& sys) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < 3; ++i) {
    auto v = validate_tube(sys.tubes[i], "tubes[" + std::to_string(i) + "]");
    out.insert(out.end(), v.begin(), v.end());
  }
  for (std::size_t i = 0; i + 1 < 3; ++i) {
    const auto& inner = sys.tubes[i];
    const auto& outer = sys.tubes[i + 1];
    const std::string idx = "tubes[" + std::to_string(i) + "]";
    if (!(inner.length_total > outer.length_total)) out.push_back({idx + ".length_total", "lengths not decreasing"});
    if (!(inner.outer_diameter <= outer.inner_diameter)) {
      out.push_back({idx + ".outer_diameter", "nesting: outer_diameter <= inner_diameter of next tube"});
    }
  }
  return out;
}

void require_valid(const CtrSystem& sys) {
  auto v = validate_system(sys);
  if (v.empty()) return;
  std::string msg;
  for (const auto& x : v) msg += (msg.empty() ? "" : "; ") + x.field + ": " + x.message;
  throw InvalidSystem(msg);
}

namespace {
double second_moment(const TubeParams& t) {
  return std::numbers::pi / 64.0 * (std::pow(t.outer_diameter, 4) - std::pow(t.inner_diameter, 4));
}
constexpr double kGpaToNmm2 = 1e3;
}  // namespace

double bending_stiffness(const TubeParams& t) { return t.youngs_modulus * kGpaToNmm2 * second_moment(t); }

double torsional_stiffness(const TubeParams& t) { return t.shear_modulus * kGpaToNmm2 * 2.0 * second_moment(t); }

CtrSystem randomize(const CtrSystem& sys, const DomainRandomizationSpec& spec, Rng& rng) {
  if (!(spec.fraction >= 0.0 && spec.fraction < 1.0)) {
    throw InvalidSpec("domain randomization fraction must lie in [0, 1)");
  }
  require_valid(sys);
  if (spec.fraction == 0.0 || spec.parameters.empty()) return sys;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int attempt = 0; attempt < kRandomizeRetries; ++attempt) {
    CtrSystem out = sys;
    for (auto& tube : out.tubes) {
      for (auto f : spec.parameters) {
        double& p = field_ref(tube, f);
        p = p * (1.0 + spec.fraction * unit(rng));
      }
    }
    if (validate_system(out).empty()) return out;
  }
  throw RetriesExhausted("no valid randomized system after " + std::to_string(kRandomizeRetries) + " draws");
}

CtrSystem reference_system(int id) {
  // length, curved length, ID, OD, E (GPa), G (GPa), precurvature (1/m)
  CtrSystem s;
  s.system_id = id;
  s.name = "system " + std::to_string(id);
  switch (id) {
    case 0:
      s.tubes = {TubeParams{431, 103, 0.7, 1.1, 102.5, 187.9, 21.3},
                 TubeParams{332, 113, 1.4, 1.8, 685, 115.3, 13.1},
                 TubeParams{174, 134, 2.0, 2.4, 169.6, 142.5, 3.5}};
      break;
    case 1:
      s.tubes = {TubeParams{370, 45, 0.3, 0.4, 500, 230, 15.8},
                 TubeParams{305, 100, 0.7, 0.9, 500, 230, 9.27},
                 TubeParams{170, 100, 1.2, 1.5, 500, 230, 4.37}};
      break;
    case 2:
      s.tubes = {TubeParams{309, 145, 0.7, 1.1, 75, 25, 1.68},
                 TubeParams{275, 114, 1.4, 1.8, 75, 25, 11.6},
                 TubeParams{173, 173, 1.83, 2.39, 75, 25, 10.8}};
      break;
    case 3:
      s.tubes = {TubeParams{150, 100, 1.0, 2.4, 50, 23, 15.82},
                 TubeParams{100, 21.6, 3.0, 3.8, 50, 23, 11.8},
                 TubeParams{70, 8.8, 4.4, 5.4, 50, 23, 20.04}};
      break;
    default:
      throw InvalidSpec("reference systems are numbered 0..3, got " + std::to_string(id));
  }
  return s;
}

std::vector<CtrSystem> reference_systems() {
  return {reference_system(0), reference_system(1), reference_system(2), reference_system(3)};
}

nlohmann::json to_json(const CtrSystem& sys) {
  nlohmann::json tubes = nlohmann::json::array();
  for (const auto& t : sys.tubes) {
    nlohmann::json jt;
    for (auto f : kAllTubeFields) jt[to_string(f)] = field_value(t, f);
    tubes.push_back(jt);
  }
  return {{"system_id", sys.system_id}, {"name", sys.name}, {"tubes", tubes}};
}

CtrSystem system_from_json(const nlohmann::json& j) {
  CtrSystem s;
  s.system_id = config::get<int>(j, "system_id", "");
  s.name = j.value("name", "system " + std::to_string(s.system_id));
  const auto& tubes = config::require(j, "tubes", "");
  if (!tubes.is_array() || tubes.size() != 3) throw ConfigError("/tubes: expected an array of exactly 3 tube blocks");
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string ptr = "/tubes/" + std::to_string(i);
    for (auto f : kAllTubeFields) field_ref(s.tubes[i], f) = config::get<double>(tubes[i], to_string(f), ptr);
  }
  return s;
}

CtrSystem load_system(const std::filesystem::path& path) {
  auto sys = system_from_json(config::load_json(path));
  auto v = validate_system(sys);
  if (!v.empty()) {
    std::string msg = path.string() + ": invalid system";
    for (const auto& x : v) msg += "; " + x.field + ": " + x.message;
    throw ConfigError(msg);
  }
  return sys;
}

void save_system(const CtrSystem& sys, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << to_json(sys).dump(2) << "\n";
}

}  // namespace ctr
