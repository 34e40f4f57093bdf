#include "ctr/env.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "ctr/config.hpp"
#include "ctr/errors.hpp"

namespace ctr {

double tolerance(const Curriculum& cur, double t) {
  t = std::max(t, 0.0);
  switch (cur.kind) {
    case CurriculumKind::Constant:
      return cur.final;
    case CurriculumKind::Linear: {
      if (t > cur.steps) return cur.final;
      const double a = (cur.final - cur.initial) / cur.steps;
      return std::max(a * t + cur.initial, cur.final);
    }
    case CurriculumKind::Decay: {
      if (t > cur.steps) return cur.final;
      // a (1 - r)^t with r = 1 - (final/initial)^(1/N)
      const double log_base = std::log(cur.final / cur.initial) / cur.steps;
      return std::max(cur.initial * std::exp(log_base * t), cur.final);
    }
  }
  return cur.final;
}

double extension_std_from_gear_ratio(double rotation_std_deg, double gear_ratio) {
  return gear_ratio * deg2rad(rotation_std_deg) * 1e3;
}

NoiseSpec NoiseSpec::defaults() {
  NoiseSpec n;
  n.rotation_encoder_std_deg = 1.0;
  n.extension_encoder_std_mm = extension_std_from_gear_ratio(1.0);
  n.tracking_std_mm = 0.8;
  return n;
}

bool NoiseSpec::is_zero() const {
  return rotation_encoder_std_deg == 0.0 && extension_encoder_std_mm == 0.0 && tracking_std_mm == 0.0;
}

NoisyReading observe_with_noise(const JointConfig& q, const Eigen::Vector3d& achieved, const NoiseSpec& spec,
                                Rng& rng) {
  if (spec.rotation_encoder_std_deg < 0 || spec.extension_encoder_std_mm < 0 || spec.tracking_std_mm < 0) {
    throw InvalidSpec("noise standard deviations must be >= 0");
  }
  NoisyReading r{q, achieved};
  if (spec.is_zero()) return r;
  std::normal_distribution<double> n01(0.0, 1.0);
  const double rot = deg2rad(spec.rotation_encoder_std_deg);
  for (int i = 0; i < 3; ++i) r.q.alpha[i] += rot * n01(rng);
  for (int i = 0; i < 3; ++i) r.q.beta[i] += spec.extension_encoder_std_mm * n01(rng);
  for (int i = 0; i < 3; ++i) r.achieved_goal[i] += spec.tracking_std_mm * n01(rng);
  return r;
}

SystemSampler::SystemSampler(SamplerKind kind, const std::vector<CtrSystem>& systems) {
  if (systems.empty()) throw InvalidSpec("system registry is empty");
  double total = 0.0;
  for (const auto& s : systems) {
    probs_.push_back(kind == SamplerKind::Uniform ? 1.0 : s.length());
    total += probs_.back();
  }
  for (auto& p : probs_) p /= total;
}

int SystemSampler::sample(Rng& rng) const {
  if (probs_.size() == 1) return 0;
  std::discrete_distribution<int> d(probs_.begin(), probs_.end());
  return d(rng);
}

Eigen::VectorXd assemble_observation(const JointConfig& q, const Eigen::Vector3d& achieved,
                                     const Eigen::Vector3d& desired, double tol, JointFrame frame,
                                     const Eigen::VectorXd& system_code) {
  Eigen::VectorXd obs(kBaseObservationDim + system_code.size());
  const JointConfig framed = to_frame(q, frame);
  obs.head<9>() = to_trig(framed).flat();
  obs.segment<3>(kGoalDeltaOffset) = achieved - desired;
  obs[kToleranceOffset] = tol;
  if (system_code.size() > 0) obs.tail(system_code.size()) = system_code;
  return obs;
}

int EnvConfig::observation_dim() const {
  if (!multi_system()) return kBaseObservationDim;
  return kBaseObservationDim + (system_encoding == SystemEncoding::OneHot ? static_cast<int>(systems.size()) : 1);
}

CtrEnv::CtrEnv(EnvConfig cfg) : cfg_(std::move(cfg)), sampler_(cfg_.sampler, cfg_.systems), rng_(cfg_.seed) {
  for (const auto& s : cfg_.systems) require_valid(s);
  if (cfg_.max_episode_steps < 1) throw InvalidSpec("max_episode_steps must be >= 1");
  if (cfg_.curriculum.initial < cfg_.curriculum.final || cfg_.curriculum.final <= 0 || cfg_.curriculum.steps <= 0) {
    throw InvalidSpec("curriculum requires initial >= final > 0 and steps > 0");
  }
  active_system_ = cfg_.systems.front();
  achieved_ = tip_position(active_system_, q_, cfg_.tier);
  desired_ = achieved_;
  refresh_observation();
}

double CtrEnv::tolerance() const {
  return fixed_tolerance_ ? *fixed_tolerance_ : ctr::tolerance(cfg_.curriculum, training_step_);
}

Eigen::VectorXd CtrEnv::system_code() const {
  if (!cfg_.multi_system()) return {};
  const int n = static_cast<int>(cfg_.systems.size());
  if (cfg_.system_encoding == SystemEncoding::OneHot) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    v[system_index_] = 1.0;
    return v;
  }
  Eigen::VectorXd v(1);
  v[0] = n > 1 ? static_cast<double>(system_index_) / (n - 1) : 0.0;
  return v;
}

void CtrEnv::refresh_observation() {
  JointConfig q_obs = q_;
  observed_achieved_ = achieved_;
  if (cfg_.noise) {
    auto noisy = observe_with_noise(q_, achieved_, *cfg_.noise, rng_);
    q_obs = noisy.q;
    observed_achieved_ = noisy.achieved_goal;
  }
  obs_ = assemble_observation(q_obs, observed_achieved_, desired_, tolerance(), cfg_.joint_frame, system_code());
}

Eigen::VectorXd CtrEnv::reset() {
  system_index_ = pinned_system_ ? *pinned_system_ : sampler_.sample(rng_);
  const CtrSystem& nominal = cfg_.systems[system_index_];
  active_system_ = cfg_.randomization ? randomize(nominal, *cfg_.randomization, rng_) : nominal;
  q_ = sample_valid_joints(active_system_, rng_, cfg_.rotation_mode);
  goal_q_ = cfg_.goal_equals_start ? q_ : sample_valid_joints(active_system_, rng_, cfg_.rotation_mode);
  achieved_ = tip_position(active_system_, q_, cfg_.tier);
  desired_ = cfg_.goal_equals_start ? achieved_ : tip_position(active_system_, goal_q_, cfg_.tier);
  steps_ = 0;
  max_steps_ = cfg_.max_episode_steps;
  done_ = false;
  refresh_observation();
  return obs_;
}

StepResult CtrEnv::step(const ActionVector& a) {
  if (done_) throw EpisodeFinished();
  const ApplyResult applied = apply_action(q_, a, cfg_.rotation_mode, active_system_);
  q_ = applied.q;
  achieved_ = tip_position(active_system_, q_, cfg_.tier);
  ++steps_;
  refresh_observation();

  StepResult r;
  r.info.achieved_goal = achieved_;
  r.info.desired_goal = desired_;
  r.info.error = (achieved_ - desired_).norm();
  r.info.tolerance = tolerance();
  r.info.q = q_;
  r.info.clamped = applied.clamped;
  r.info.action_clipped = applied.action_clipped;
  r.info.system_index = system_index_;
  const double reward_error = cfg_.reward_from_noisy ? (observed_achieved_ - desired_).norm() : r.info.error;
  r.reward = sparse_reward(reward_error, r.info.tolerance);
  r.info.success = r.reward == 0.0;
  r.info.truncated = !r.info.success && steps_ >= max_steps_;
  r.terminal = r.info.success || r.info.truncated;
  r.observation = obs_;
  done_ = r.terminal;
  return r;
}

void CtrEnv::set_system(int index) {
  if (index < 0 || index >= static_cast<int>(cfg_.systems.size())) throw InvalidSpec("system index out of range");
  system_index_ = index;
  active_system_ = cfg_.systems[index];
}

void CtrEnv::pin_system(std::optional<int> index) {
  if (index && (*index < 0 || *index >= static_cast<int>(cfg_.systems.size()))) {
    throw InvalidSpec("system index out of range");
  }
  pinned_system_ = index;
}

void CtrEnv::set_joints(const JointConfig& q) {
  require_feasible(active_system_, q);
  q_ = q;
  achieved_ = tip_position(active_system_, q_, cfg_.tier);
  refresh_observation();
}

void CtrEnv::set_desired_goal(const Eigen::Vector3d& goal) {
  desired_ = goal;
  refresh_observation();
}

void CtrEnv::begin_segment(int max_steps) {
  steps_ = 0;
  max_steps_ = max_steps;
  done_ = false;
}

namespace {
CurriculumKind curriculum_kind(const std::string& s) {
  if (s == "constant") return CurriculumKind::Constant;
  if (s == "linear") return CurriculumKind::Linear;
  if (s == "decay") return CurriculumKind::Decay;
  throw ConfigError("/env/curriculum/kind: expected constant|linear|decay, got '" + s + "'");
}
std::string to_string(CurriculumKind k) {
  switch (k) {
    case CurriculumKind::Constant: return "constant";
    case CurriculumKind::Linear: return "linear";
    case CurriculumKind::Decay: return "decay";
  }
  return "?";
}
}  // namespace

EnvConfig env_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  EnvConfig cfg;
  const auto& systems = config::require(j, "systems", "");
  if (!systems.is_array() || systems.empty()) throw ConfigError("/systems: expected a non-empty array of system files");
  for (const auto& entry : systems) {
    if (entry.is_object()) {
      CtrSystem sys = system_from_json(entry);
      require_valid(sys);
      cfg.systems.push_back(sys);
      continue;
    }
    if (!entry.is_string()) throw ConfigError("/systems: entries must be file paths or inline systems");
    std::filesystem::path p = entry.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    cfg.systems.push_back(load_system(p));
  }
  const nlohmann::json env = j.value("env", nlohmann::json::object());
  const std::string where = "/env";
  const auto rot = config::get_or<std::string>(env, "rotation_mode", where, "constraint_free");
  if (rot == "constraint_free") cfg.rotation_mode = RotationMode::ConstraintFree;
  else if (rot == "constrained") cfg.rotation_mode = RotationMode::Constrained;
  else throw ConfigError(where + "/rotation_mode: expected constrained|constraint_free, got '" + rot + "'");
  const auto frame = config::get_or<std::string>(env, "joint_frame", where, "egocentric");
  if (frame == "egocentric") cfg.joint_frame = JointFrame::Egocentric;
  else if (frame == "proprioceptive") cfg.joint_frame = JointFrame::Proprioceptive;
  else throw ConfigError(where + "/joint_frame: expected egocentric|proprioceptive, got '" + frame + "'");
  if (env.contains("curriculum")) {
    const auto& c = env.at("curriculum");
    const std::string cw = where + "/curriculum";
    cfg.curriculum.kind = curriculum_kind(config::get_or<std::string>(c, "kind", cw, "decay"));
    cfg.curriculum.initial = config::get_or<double>(c, "initial", cw, cfg.curriculum.initial);
    cfg.curriculum.final = config::get_or<double>(c, "final", cw, cfg.curriculum.final);
    cfg.curriculum.steps = config::get_or<double>(c, "steps", cw, cfg.curriculum.steps);
  }
  if (env.contains("noise") && !env.at("noise").is_null()) {
    const auto& n = env.at("noise");
    const std::string nw = where + "/noise";
    NoiseSpec spec = NoiseSpec::defaults();
    spec.rotation_encoder_std_deg = config::get_or<double>(n, "rotation_encoder_std_deg", nw, spec.rotation_encoder_std_deg);
    spec.extension_encoder_std_mm = config::get_or<double>(
        n, "extension_encoder_std_mm", nw, extension_std_from_gear_ratio(spec.rotation_encoder_std_deg));
    spec.tracking_std_mm = config::get_or<double>(n, "tracking_std_mm", nw, spec.tracking_std_mm);
    cfg.noise = spec;
  }
  cfg.reward_from_noisy = config::get_or<bool>(env, "reward_from_noisy", where, false);
  if (env.contains("domain_randomization") && !env.at("domain_randomization").is_null()) {
    const auto& d = env.at("domain_randomization");
    const std::string dw = where + "/domain_randomization";
    DomainRandomizationSpec spec;
    spec.fraction = config::get<double>(d, "fraction", dw);
    if (d.contains("parameters")) {
      spec.parameters.clear();
      for (const auto& p : d.at("parameters")) spec.parameters.push_back(tube_field_from_string(p.get<std::string>()));
    }
    if (!(spec.fraction >= 0.0 && spec.fraction < 1.0)) throw ConfigError(dw + "/fraction: must lie in [0, 1)");
    cfg.randomization = spec;
  }
  const auto sampler = config::get_or<std::string>(env, "sampler", where, "uniform");
  if (sampler == "uniform") cfg.sampler = SamplerKind::Uniform;
  else if (sampler == "length_proportional") cfg.sampler = SamplerKind::LengthProportional;
  else throw ConfigError(where + "/sampler: expected uniform|length_proportional, got '" + sampler + "'");
  const auto enc = config::get_or<std::string>(env, "system_encoding", where, "scaled");
  if (enc == "scaled") cfg.system_encoding = SystemEncoding::Scaled;
  else if (enc == "one_hot") cfg.system_encoding = SystemEncoding::OneHot;
  else throw ConfigError(where + "/system_encoding: expected scaled|one_hot, got '" + enc + "'");
  if (env.contains("include_system_id")) cfg.include_system_id = env.at("include_system_id").get<bool>();
  cfg.max_episode_steps = config::get_or<int>(env, "max_episode_steps", where, cfg.max_episode_steps);
  const auto tier = config::get_or<std::string>(env, "kinematics", where, "rigid");
  if (tier == "rigid") cfg.tier = KinematicsTier::Rigid;
  else if (tier == "compliant") cfg.tier = KinematicsTier::TorsionallyCompliant;
  else throw ConfigError(where + "/kinematics: expected rigid|compliant, got '" + tier + "'");
  cfg.goal_equals_start = config::get_or<bool>(env, "goal_equals_start", where, false);
  cfg.seed = config::get_or<std::uint64_t>(j, "seed", "", 0);
  return cfg;
}

nlohmann::json to_json(const EnvConfig& cfg) {
  nlohmann::json systems = nlohmann::json::array();
  for (const auto& s : cfg.systems) systems.push_back(to_json(s));
  nlohmann::json env{
      {"rotation_mode", cfg.rotation_mode == RotationMode::Constrained ? "constrained" : "constraint_free"},
      {"joint_frame", cfg.joint_frame == JointFrame::Egocentric ? "egocentric" : "proprioceptive"},
      {"curriculum",
       {{"kind", to_string(cfg.curriculum.kind)},
        {"initial", cfg.curriculum.initial},
        {"final", cfg.curriculum.final},
        {"steps", cfg.curriculum.steps}}},
      {"reward_from_noisy", cfg.reward_from_noisy},
      {"sampler", cfg.sampler == SamplerKind::Uniform ? "uniform" : "length_proportional"},
      {"system_encoding", cfg.system_encoding == SystemEncoding::Scaled ? "scaled" : "one_hot"},
      {"include_system_id", cfg.multi_system()},
      {"max_episode_steps", cfg.max_episode_steps},
      {"kinematics", cfg.tier == KinematicsTier::Rigid ? "rigid" : "compliant"},
      {"goal_equals_start", cfg.goal_equals_start}};
  if (cfg.noise) {
    env["noise"] = {{"rotation_encoder_std_deg", cfg.noise->rotation_encoder_std_deg},
                    {"extension_encoder_std_mm", cfg.noise->extension_encoder_std_mm},
                    {"tracking_std_mm", cfg.noise->tracking_std_mm}};
  }
  if (cfg.randomization) {
    nlohmann::json params = nlohmann::json::array();
    for (auto f : cfg.randomization->parameters) params.push_back(to_string(f));
    env["domain_randomization"] = {{"fraction", cfg.randomization->fraction}, {"parameters", params}};
  }
  return {{"systems", systems}, {"env", env}, {"seed", cfg.seed}};
}

void write_episode_log_header(std::ostream& out) {
  out << "t,beta1,beta2,beta3,alpha1,alpha2,alpha3,ga_x,ga_y,ga_z,gd_x,gd_y,gd_z,e_t,r_t\n";
}

void write_episode_log_row(std::ostream& out, int t, const StepResult& r) {
  const auto& i = r.info;
  out << t;
  for (int k = 0; k < 3; ++k) out << "," << i.q.beta[k];
  for (int k = 0; k < 3; ++k) out << "," << i.q.alpha[k];
  for (int k = 0; k < 3; ++k) out << "," << i.achieved_goal[k];
  for (int k = 0; k < 3; ++k) out << "," << i.desired_goal[k];
  out << "," << i.error << "," << r.reward << "\n";
}

}  // namespace ctr
