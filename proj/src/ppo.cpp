#include "gaitlab/ppo.hpp"

#include <numeric>

namespace gaitlab {

using nlohmann::json;

void PpoConfig::validate() const {
  if (!(clip > 0.0)) throw ValidationError("ppo.clip must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("ppo.gamma must lie in (0, 1]");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ValidationError("ppo.lambda must lie in (0, 1]");
  if (entropy_coef < 0.0 || value_coef < 0.0) throw ValidationError("ppo coefficients must be >= 0");
  if (!(kl_target > 0.0)) throw ValidationError("ppo.kl_target must be > 0");
  if (agents < 1 || steps_per_iteration < 1 || epochs < 1 || minibatches < 1)
    throw ValidationError("ppo sizes must be >= 1");
  if (agents * steps_per_iteration < minibatches) throw ValidationError("ppo batch smaller than the minibatch count");
  if (!(learning_rate > 0.0) || !(lr_min > 0.0) || lr_min > lr_max) throw ValidationError("ppo learning rates invalid");
  if (!(reward_scale > 0.0)) throw ValidationError("ppo.reward_scale must be > 0");
}

json PpoConfig::to_json() const {
  return {{"clip", clip},
          {"gamma", gamma},
          {"lambda", lambda},
          {"entropy_coef", entropy_coef},
          {"value_coef", value_coef},
          {"kl_target", kl_target},
          {"agents", agents},
          {"full_scale_agents", full_scale_agents},
          {"steps_per_iteration", steps_per_iteration},
          {"epochs", epochs},
          {"minibatches", minibatches},
          {"learning_rate", learning_rate},
          {"lr_min", lr_min},
          {"lr_max", lr_max},
          {"max_grad_norm", max_grad_norm},
          {"reward_scale", reward_scale}};
}

PpoConfig PpoConfig::from_json(const json& doc, const PpoConfig& base) {
  if (!doc.is_object()) throw ParseError("ppo", "expected an object");
  PpoConfig c = base;
  for (const auto& [key, v] : doc.items()) {
    const std::string path = "ppo." + key;
    auto num = [&]() {
      if (!v.is_number()) throw ParseError(path, "expected a number");
      return v.get<double>();
    };
    auto integer = [&]() {
      if (!v.is_number_integer()) throw ParseError(path, "expected an integer");
      return v.get<int>();
    };
    if (key == "clip") c.clip = num();
    else if (key == "gamma") c.gamma = num();
    else if (key == "lambda") c.lambda = num();
    else if (key == "entropy_coef") c.entropy_coef = num();
    else if (key == "value_coef") c.value_coef = num();
    else if (key == "kl_target") c.kl_target = num();
    else if (key == "agents") c.agents = integer();
    else if (key == "full_scale_agents") c.full_scale_agents = integer();
    else if (key == "steps_per_iteration") c.steps_per_iteration = integer();
    else if (key == "epochs") c.epochs = integer();
    else if (key == "minibatches") c.minibatches = integer();
    else if (key == "learning_rate") c.learning_rate = num();
    else if (key == "lr_min") c.lr_min = num();
    else if (key == "lr_max") c.lr_max = num();
    else if (key == "max_grad_norm") c.max_grad_norm = num();
    else if (key == "reward_scale") c.reward_scale = num();
    else throw ParseError(path, "unknown key");
  }
  c.validate();
  return c;
}

GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<bool>& dones, double gamma, double lambda) {
  const size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n) throw ContractError("GAE inputs have inconsistent lengths");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next = 0.0;
  for (size_t k = n; k-- > 0;) {
    const double mask = dones[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * values[k + 1] * mask - values[k];
    next = delta + gamma * lambda * mask * next;
    out.advantages[k] = next;
    out.returns[k] = next + values[k];
  }
  return out;
}

void normalize(std::vector<double>& x) {
  if (x.empty()) return;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / x.size());
  for (double& v : x) v = (v - mean) / (sd + 1e-8);
}

double adapt_learning_rate(double lr, double kl, const PpoConfig& cfg) {
  if (kl > 2.0 * cfg.kl_target) return std::max(cfg.lr_min, lr / 2.0);
  if (kl < 0.5 * cfg.kl_target && kl > 0.0) return std::min(cfg.lr_max, lr * 1.5);
  return lr;
}

}  // namespace gaitlab
