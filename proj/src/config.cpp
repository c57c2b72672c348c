#include "asyndiff/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace asyndiff {

void RunConfig::set(const std::string& key, const std::string& value) {
  auto as_double = [&] { return std::stod(value); };
  auto as_int = [&] { return std::stoi(value); };
  auto as_u64 = [&] { return std::stoull(value); };

  if (key == "family") family = schedule_kind_from_string(value);
  else if (key == "base_family") base_family = schedule_kind_from_string(value);
  else if (key == "omega") omega = as_double();
  else if (key == "sampler") {
    if (value == "ddpm") sampler = SamplerKind::DDPM;
    else if (value == "ddim") sampler = SamplerKind::DDIM;
    else throw std::invalid_argument("sampler must be ddpm or ddim");
  }
  else if (key == "eta") eta = as_double();
  else if (key == "guidance") guidance = as_double();
  else if (key == "steps") steps = as_int();
  else if (key == "seed") seed = as_u64();
  else if (key == "mask_policy") {
    if (value != "none" && value != "fixed" && value != "dynamic" &&
        value != "random")
      throw std::invalid_argument("mask_policy: " + value);
    mask_policy = value;
  }
  else if (key == "random_mask_density") random_mask_density = as_double();
  else if (key == "timestep_mode") {
    if (value != "continuous" && value != "rounded")
      throw std::invalid_argument("timestep_mode: " + value);
    timestep_mode = value;
  }
  else if (key == "noise_schedule") {
    if (value != "cosine" && value != "linear_beta")
      throw std::invalid_argument("noise_schedule: " + value);
    noise_schedule = value;
  }
  else if (key == "beta_start") beta_start = as_double();
  else if (key == "beta_end") beta_end = as_double();
  else if (key == "n_train") n_train = as_int();
  else if (key == "dims") dims = as_int();
  else if (key == "channels") channels = as_int();
  else if (key == "count") count = as_int();
  else if (key == "lr") lr = as_double();
  else if (key == "train_steps") train_steps = as_int();
  else if (key == "batch") batch = as_int();
  else if (key == "samples") samples = as_int();
  else if (key == "eval_samples") eval_samples = as_int();
  else if (key == "threads") threads = as_int();
  else throw std::invalid_argument("unknown config key: " + key);
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

std::string RunConfig::fingerprint() const {
  std::ostringstream os;
  os << "family=" << to_string(family) << "\n";
  if (family == ScheduleKind::Reweighted) {
    os << "base_family=" << to_string(base_family) << "\n";
    os << "omega=" << omega << "\n";
  }
  os << "sampler=" << (sampler == SamplerKind::DDPM ? "ddpm" : "ddim") << "\n"
     << "eta=" << eta << "\n"
     << "guidance=" << guidance << "\n"
     << "steps=" << steps << "\n"
     << "seed=" << seed << "\n"
     << "mask_policy=" << mask_policy << "\n"
     << "timestep_mode=" << timestep_mode << "\n"
     << "noise_schedule=" << noise_schedule << "\n"
     << "dims=" << dims << "\n"
     << "channels=" << channels << "\n";
  return os.str();
}

ScheduleFamily RunConfig::schedule_family() const {
  ScheduleFamily f;
  f.kind = family;
  f.horizon = steps;
  f.base_kind = base_family;
  f.omega = omega;
  return f;
}

NoiseSchedule RunConfig::make_noise_schedule() const {
  if (noise_schedule == "cosine") return NoiseSchedule::cosine(steps);
  return NoiseSchedule::discrete_linear_beta(steps, beta_start, beta_end,
                                             n_train);
}

SamplerConfig RunConfig::sampler_config() const {
  SamplerConfig sc;
  sc.sampler_kind = sampler;
  sc.eta = eta;
  sc.guidance_scale = guidance;
  sc.steps = steps;
  sc.rng_seed = seed;
  sc.round_timesteps = timestep_mode == "rounded";
  return sc;
}

}  // namespace asyndiff
