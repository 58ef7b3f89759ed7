#include "gaitlab/vec_env.hpp"

#include <cmath>

#include "gaitlab/parallel.hpp"

namespace gaitlab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t base, int env, std::uint64_t episode) {
  return splitmix64(splitmix64(splitmix64(base) ^ static_cast<std::uint64_t>(env)) ^ episode);
}

BipedVecEnv::BipedVecEnv(int n, std::shared_ptr<const RobotModel> model, std::shared_ptr<const GaitLibrary> library,
                         const RewardConfig& rewards, const EpisodeConfig& episode, int workers)
    : workers_(workers) {
  if (n < 1) throw ContractError("need at least one environment");
  envs_.reserve(n);
  for (int i = 0; i < n; ++i) {
    EpisodeConfig e = episode;
    e.seed = episode_seed(episode.seed, i, 0);
    envs_.emplace_back(model, library, rewards, e);
  }
  means_.assign(n, {});
  episodes_.assign(n, 0);
}

std::vector<std::string> BipedVecEnv::term_names() const {
  std::vector<std::string> names;
  for (int i = 0; i < kNumTerms; ++i) names.emplace_back(term_name(static_cast<Term>(i)));
  return names;
}

Eigen::MatrixXd BipedVecEnv::reset(std::uint64_t seed) {
  seed_ = seed;
  const int n = num_envs();
  Eigen::MatrixXd obs(obs_size(), n);
  std::mt19937_64 rng(episode_seed(seed, -1, 0));
  const long max_steps = std::lround(envs_.front().episode_config().t_max / envs_.front().episode_config().control_dt());
  std::uniform_int_distribution<long> start(0, std::max(0L, max_steps - 1));
  std::vector<long> offsets(n);
  for (int i = 0; i < n; ++i) offsets[i] = start(rng);
  parallel_for(n, workers_, [&](int i) {
    episodes_[i] = 0;
    means_[i].reset();
    obs.col(i) = envs_[i].reset(episode_seed(seed, i, 0));
    envs_[i].set_elapsed_steps(offsets[i]);
  });
  return obs;
}

void BipedVecEnv::step(const Eigen::MatrixXd& actions, VecStep& out) {
  const int n = num_envs();
  if (actions.cols() != n || actions.rows() != action_size()) throw ContractError("action batch has the wrong shape");
  out.obs.resize(obs_size(), n);
  out.terminal_obs.setZero(obs_size(), n);
  out.rewards.assign(n, 0.0);
  out.dones.assign(n, 0);
  out.timeouts.assign(n, 0);
  std::vector<EpisodeRecord> records(n);
  std::vector<std::uint8_t> finished(n, 0);
  parallel_for(n, workers_, [&](int i) {
    BipedEnv& env = envs_[i];
    StepResult r = env.step(actions.col(i));
    means_[i].add(r.info.reward);
    out.rewards[i] = r.reward;
    if (!r.done) {
      out.obs.col(i) = r.obs;
      return;
    }
    out.dones[i] = 1;
    out.timeouts[i] = r.timeout ? 1 : 0;
    out.terminal_obs.col(i) = r.obs;
    EpisodeRecord& rec = records[i];
    rec.env = i;
    rec.length = r.info.time;
    rec.fell = r.fell;
    const TermArray m = means_[i].means();
    rec.term_means.assign(m.begin(), m.end());
    finished[i] = 1;
    means_[i].reset();
    ++episodes_[i];
    out.obs.col(i) = env.reset(episode_seed(seed_, i, episodes_[i]));
  });
  out.finished.clear();
  for (int i = 0; i < n; ++i)
    if (finished[i]) out.finished.push_back(std::move(records[i]));
}

DoubleIntegratorVecEnv::DoubleIntegratorVecEnv(int n, Config cfg) : cfg_(cfg) {
  if (n < 1) throw ContractError("need at least one environment");
  v_.assign(n, 0.0);
  c_.assign(n, 0.0);
  prev_.assign(n, 0.0);
  t_.assign(n, 0);
  sum_reward_.assign(n, 0.0);
  sum_err_.assign(n, 0.0);
  episodes_.assign(n, 0);
}

void DoubleIntegratorVecEnv::reset_one(int i) {
  std::mt19937_64 rng(episode_seed(seed_, i, episodes_[i]));
  c_[i] = std::uniform_real_distribution<double>(cfg_.command_lo, cfg_.command_hi)(rng);
  v_[i] = 0.0;
  prev_[i] = 0.0;
  t_[i] = 0;
  sum_reward_[i] = 0.0;
  sum_err_[i] = 0.0;
}

Eigen::VectorXd DoubleIntegratorVecEnv::observe(int i) const {
  Eigen::VectorXd o(3);
  o << v_[i], c_[i], prev_[i];
  return o;
}

Eigen::MatrixXd DoubleIntegratorVecEnv::reset(std::uint64_t seed) {
  seed_ = seed;
  Eigen::MatrixXd obs(3, num_envs());
  for (int i = 0; i < num_envs(); ++i) {
    episodes_[i] = 0;
    reset_one(i);
    obs.col(i) = observe(i);
  }
  return obs;
}

void DoubleIntegratorVecEnv::step(const Eigen::MatrixXd& actions, VecStep& out) {
  const int n = num_envs();
  if (actions.cols() != n || actions.rows() != 1) throw ContractError("action batch has the wrong shape");
  out.obs.resize(3, n);
  out.terminal_obs.setZero(3, n);
  out.rewards.assign(n, 0.0);
  out.dones.assign(n, 0);
  out.timeouts.assign(n, 0);
  out.finished.clear();
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(actions(0, i))) throw ContractError("action must be finite");
    const double a = std::clamp(actions(0, i), -1.0, 1.0);
    v_[i] += cfg_.accel_gain * a * cfg_.dt;
    prev_[i] = a;
    ++t_[i];
    const double err = std::abs(v_[i] - c_[i]);
    out.rewards[i] = std::exp(-err / 0.25);
    sum_reward_[i] += out.rewards[i];
    sum_err_[i] += err;
    if (t_[i] >= cfg_.episode_steps) {
      out.dones[i] = 1;
      out.timeouts[i] = 1;
      out.terminal_obs.col(i) = observe(i);
      EpisodeRecord rec;
      rec.env = i;
      rec.length = t_[i] * cfg_.dt;
      rec.term_means = {sum_reward_[i] / t_[i], sum_err_[i] / t_[i]};
      out.finished.push_back(std::move(rec));
      ++episodes_[i];
      reset_one(i);
    }
    out.obs.col(i) = observe(i);
  }
}

}  // namespace gaitlab
