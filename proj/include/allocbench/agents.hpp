#pragma once

#include "allocbench/environment.hpp"
#include "allocbench/market_data.hpp"
#include "allocbench/neuro/adam.hpp"
#include "allocbench/neuro/gaussian.hpp"
#include "allocbench/neuro/mlp.hpp"
#include "allocbench/neuro/tape.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace allocbench::agents {

using neuro::Matrix;

enum class Algorithm : std::uint32_t { A2C = 0, PPO = 1, DDPG = 2, TD3 = 3, SAC = 4 };

inline constexpr std::array<Algorithm, 5> kAllAlgorithms = {Algorithm::A2C, Algorithm::PPO, Algorithm::DDPG,
                                                            Algorithm::TD3, Algorithm::SAC};

std::string_view algorithm_name(Algorithm algorithm) noexcept;
Algorithm parse_algorithm(std::string_view name);
bool is_off_policy(Algorithm algorithm) noexcept;

struct AgentConfig {
  Algorithm algorithm = Algorithm::PPO;
  std::uint64_t seed = 0;
  double gamma = 0.99;
  double tau = 0.005;
  std::size_t rollout_length = 256;
  double clip_epsilon = 0.2;
  std::size_t ppo_epochs = 10;
  std::size_t buffer_capacity = 100000;
  std::size_t batch_size = 64;
  double exploration_noise = 0.1;
  double target_noise = 0.2;
  double target_noise_clip = 0.5;
  std::size_t policy_delay = 2;
  double alpha = 0.2;
  std::size_t total_steps = 200000;

  std::vector<std::size_t> hidden{64, 64};
  neuro::Activation activation = neuro::Activation::Tanh;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  std::size_t warmup_steps = 1000;
  std::size_t ppo_minibatch = 64;
  double gae_lambda = 0.95;
  double value_coef = 0.5;
  double entropy_coef = 1e-3;  ///< A2C and PPO
  double initial_log_std = 0.0;
  double sac_action_bound = 3.0;
  double reward_scale = 1000.0;  ///< applied after dividing rewards by the initial value

  void validate() const;
};

/// One environment interaction as seen by an agent. Actions are raw
/// (pre-softmax) outputs; rewards are already normalized and scaled.
struct Experience {
  Eigen::VectorXd observation;
  Eigen::VectorXd action;
  double reward = 0.0;
  Eigen::VectorXd next_observation;
  bool done = false;
};

/// Column-stacked experiences; rows are samples.
struct Batch {
  Matrix observations;
  Matrix actions;
  Eigen::VectorXd rewards;
  Matrix next_observations;
  Eigen::VectorXd done;  ///< 1 for terminal, 0 otherwise

  static Batch stack(const std::vector<Experience>& items);
  Eigen::Index size() const noexcept { return observations.rows(); }
};

struct RolloutStep {
  Eigen::VectorXd observation;
  Eigen::VectorXd action;  ///< raw Gaussian sample
  double reward = 0.0;
  double log_prob = 0.0;
  double value = 0.0;
  bool done = false;
};

struct Rollout {
  std::vector<RolloutStep> steps;
  double bootstrap_value = 0.0;  ///< v(s_T) for the state after the last step

  void validate() const;
};

struct Losses {
  double actor = 0.0;
  double critic = 0.0;
  bool actor_updated = false;
};

/// a = q - v
double advantage(double q_value, double v_value) noexcept;
Eigen::VectorXd advantage(const Eigen::VectorXd& q_values, const Eigen::VectorXd& v_values);

/// R_t = r_t + gamma (1 - done_t) R_{t+1}, seeded with the bootstrap value.
Eigen::VectorXd n_step_returns(const Rollout& rollout, double gamma);

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;  ///< advantages + stored values
};
GaeResult generalized_advantages(const Rollout& rollout, double gamma, double lambda);

/// min(rho A, clip(rho, 1 - eps, 1 + eps) A) for one sample.
double clipped_surrogate(double ratio, double adv, double epsilon) noexcept;
/// Mean clipped surrogate over a batch, rho = exp(log_prob_new - log_prob_old).
neuro::Var clipped_surrogate(neuro::Var log_prob_new, const Eigen::VectorXd& log_prob_old,
                             const Eigen::VectorXd& adv, double epsilon);

/// Squashed action a = bound * tanh(u) and its log density under the
/// Gaussian of u, with the change-of-variables correction. Returns B x 1.
struct SquashedSample {
  neuro::Var action;
  neuro::Var log_prob;
};
SquashedSample squashed_sample(neuro::Var mean, neuro::Var log_std, const Matrix& eps, double bound);

/// Common interface of the five trained agents.
class Agent {
 public:
  Agent(AgentConfig cfg, std::size_t observation_size, std::size_t assets);
  virtual ~Agent() = default;
  Agent(const Agent&) = default;
  Agent& operator=(const Agent&) = default;

  Algorithm algorithm() const noexcept { return cfg_.algorithm; }
  const AgentConfig& config() const noexcept { return cfg_; }
  AgentConfig& config() noexcept { return cfg_; }
  std::size_t observation_size() const noexcept { return observation_size_; }
  std::size_t assets() const noexcept { return assets_; }

  /// Raw action; the environment maps it to weights with softmax. greedy
  /// calls never touch `rng`.
  virtual Eigen::VectorXd act(const Eigen::VectorXd& observation, bool greedy, std::mt19937_64& rng) const = 0;

  /// Every network in checkpoint order.
  virtual std::vector<const neuro::Mlp*> networks() const = 0;
  virtual std::vector<neuro::Mlp*> networks() = 0;
  /// Extra learned vectors (log-stdevs) in checkpoint order.
  virtual std::vector<const Eigen::VectorXd*> vectors() const { return {}; }
  virtual std::vector<Eigen::VectorXd*> vectors() { return {}; }

  virtual std::unique_ptr<Agent> clone() const = 0;

  bool parameters_finite() const;
  /// Every parameter concatenated in checkpoint order.
  Eigen::VectorXd flat_parameters() const;

  std::vector<double> episode_rewards;  ///< currency reward summed per episode

 protected:
  void check_observation(const Eigen::VectorXd& observation) const;

  AgentConfig cfg_;
  std::size_t observation_size_;
  std::size_t assets_;
};

/// Gaussian actor with a state-value critic.
class A2cAgent : public Agent {
 public:
  A2cAgent(AgentConfig cfg, std::size_t observation_size, std::size_t assets, std::mt19937_64* init);

  Eigen::VectorXd act(const Eigen::VectorXd& observation, bool greedy, std::mt19937_64& rng) const override;
  std::vector<const neuro::Mlp*> networks() const override { return {&actor.mean, &critic}; }
  std::vector<neuro::Mlp*> networks() override { return {&actor.mean, &critic}; }
  std::vector<const Eigen::VectorXd*> vectors() const override { return {&actor.log_std}; }
  std::vector<Eigen::VectorXd*> vectors() override { return {&actor.log_std}; }
  std::unique_ptr<Agent> clone() const override { return std::make_unique<A2cAgent>(*this); }

  double value(const Eigen::VectorXd& observation) const;

  neuro::GaussianPolicy actor;
  neuro::Mlp critic;
  neuro::Adam actor_opt;
  neuro::Adam critic_opt;
};

/// Same networks as A2C; trained with the clipped surrogate.
class PpoAgent : public A2cAgent {
 public:
  using A2cAgent::A2cAgent;
  std::unique_ptr<Agent> clone() const override { return std::make_unique<PpoAgent>(*this); }
};

/// Deterministic actor with one Q critic and target copies of both.
class DdpgAgent : public Agent {
 public:
  DdpgAgent(AgentConfig cfg, std::size_t observation_size, std::size_t assets, std::mt19937_64* init);

  Eigen::VectorXd act(const Eigen::VectorXd& observation, bool greedy, std::mt19937_64& rng) const override;
  std::vector<const neuro::Mlp*> networks() const override { return {&actor, &critic, &actor_target, &critic_target}; }
  std::vector<neuro::Mlp*> networks() override { return {&actor, &critic, &actor_target, &critic_target}; }
  std::unique_ptr<Agent> clone() const override { return std::make_unique<DdpgAgent>(*this); }

  neuro::Mlp actor;
  neuro::Mlp critic;
  neuro::Mlp actor_target;
  neuro::Mlp critic_target;
  neuro::Adam actor_opt;
  neuro::Adam critic_opt;
};

/// Deterministic actor with twin Q critics.
class Td3Agent : public Agent {
 public:
  Td3Agent(AgentConfig cfg, std::size_t observation_size, std::size_t assets, std::mt19937_64* init);

  Eigen::VectorXd act(const Eigen::VectorXd& observation, bool greedy, std::mt19937_64& rng) const override;
  std::vector<const neuro::Mlp*> networks() const override {
    return {&actor, &critic1, &critic2, &actor_target, &critic1_target, &critic2_target};
  }
  std::vector<neuro::Mlp*> networks() override {
    return {&actor, &critic1, &critic2, &actor_target, &critic1_target, &critic2_target};
  }
  std::unique_ptr<Agent> clone() const override { return std::make_unique<Td3Agent>(*this); }

  neuro::Mlp actor;
  neuro::Mlp critic1;
  neuro::Mlp critic2;
  neuro::Mlp actor_target;
  neuro::Mlp critic1_target;
  neuro::Mlp critic2_target;
  neuro::Adam actor_opt;
  neuro::Adam critic1_opt;
  neuro::Adam critic2_opt;
};

/// Squashed-Gaussian actor with twin Q critics and fixed temperature.
class SacAgent : public Agent {
 public:
  SacAgent(AgentConfig cfg, std::size_t observation_size, std::size_t assets, std::mt19937_64* init);

  Eigen::VectorXd act(const Eigen::VectorXd& observation, bool greedy, std::mt19937_64& rng) const override;
  std::vector<const neuro::Mlp*> networks() const override {
    return {&actor.mean, &critic1, &critic2, &critic1_target, &critic2_target};
  }
  std::vector<neuro::Mlp*> networks() override {
    return {&actor.mean, &critic1, &critic2, &critic1_target, &critic2_target};
  }
  std::vector<const Eigen::VectorXd*> vectors() const override { return {&actor.log_std}; }
  std::vector<Eigen::VectorXd*> vectors() override { return {&actor.log_std}; }
  std::unique_ptr<Agent> clone() const override { return std::make_unique<SacAgent>(*this); }

  neuro::GaussianPolicy actor;
  neuro::Mlp critic1;
  neuro::Mlp critic2;
  neuro::Mlp critic1_target;
  neuro::Mlp critic2_target;
  neuro::Adam actor_opt;
  neuro::Adam critic1_opt;
  neuro::Adam critic2_opt;
};

/// Glorot-initialized agent drawn from `rng`; a null `rng` gives all-zero
/// networks.
std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, std::size_t observation_size, std::size_t assets,
                                  std::mt19937_64* rng);

/// Q(s, softmax(a)) for a batch; actions are raw.
neuro::Var q_value(const neuro::Mlp& critic, neuro::Var observations, neuro::Var raw_actions,
                   neuro::Mlp::Binding* binding = nullptr);
Eigen::VectorXd q_value(const neuro::Mlp& critic, const Matrix& observations, const Matrix& raw_actions);

Losses a2c_update(A2cAgent& agent, const Rollout& rollout);
/// Core of a2c_update with caller-supplied returns.
Losses a2c_update_with_returns(A2cAgent& agent, const Rollout& rollout, const Eigen::VectorXd& returns);

Losses ppo_update(PpoAgent& agent, const Rollout& rollout, std::mt19937_64& rng);
/// Loss minimized on one PPO minibatch: -surrogate + value_coef * value_mse
/// - entropy_coef * entropy. Records onto `tape`.
struct PpoTerms {
  neuro::Var loss;
  neuro::Var surrogate;
  neuro::Var value_loss;
  neuro::Var entropy;
};
PpoTerms ppo_minibatch_loss(neuro::Tape& tape, const PpoAgent& agent, const Matrix& observations,
                            const Matrix& actions, const Eigen::VectorXd& old_log_probs,
                            const Eigen::VectorXd& advantages, const Eigen::VectorXd& returns,
                            neuro::Mlp::Binding* actor_binding, neuro::Var* log_std_var,
                            neuro::Mlp::Binding* critic_binding);

Eigen::VectorXd ddpg_targets(const DdpgAgent& agent, const Batch& batch);
Losses ddpg_update(DdpgAgent& agent, const Batch& batch);

/// Target-policy smoothing noise, already clipped.
Matrix td3_target_noise(const AgentConfig& cfg, Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);
Eigen::VectorXd td3_targets(const Td3Agent& agent, const Batch& batch, const Matrix& noise);
Losses td3_update(Td3Agent& agent, const Batch& batch, std::size_t step, std::mt19937_64& rng);
Losses td3_update_with_noise(Td3Agent& agent, const Batch& batch, std::size_t step, const Matrix& noise);

Eigen::VectorXd sac_targets(const SacAgent& agent, const Batch& batch, const Matrix& next_eps);
/// alpha * log pi(a|s) - min(Q1, Q2)(s, a), averaged, with a = bound * tanh(mean + std * eps).
double sac_actor_loss(const SacAgent& agent, const Batch& batch, const Matrix& eps);
Losses sac_update(SacAgent& agent, const Batch& batch, std::mt19937_64& rng);
Losses sac_update_with_noise(SacAgent& agent, const Batch& batch, const Matrix& next_eps, const Matrix& eps);

/// Checkpoint: magic "ABCK", uint32 version, uint32 algorithm, uint32 block
/// count, then one neuro block per network and per extra vector.
void save_agent(std::ostream& out, const Agent& agent);
std::unique_ptr<Agent> load_agent(std::istream& in, const AgentConfig& cfg, std::size_t observation_size,
                                  std::size_t assets);

/// Runs cfg.total_steps environment steps over repeated episodes on `frame`.
std::unique_ptr<Agent> train(const AgentConfig& cfg, const market::PriceFrame& frame, const env::EnvConfig& env_cfg);

/// CSV with header `episode,cumulative_reward`, one row per finished episode.
void write_training_log(std::ostream& out, const Agent& agent);

/// Greedy softmax weights for an observation.
Eigen::VectorXd greedy_weights(const Agent& agent, const Eigen::VectorXd& observation);

}  // namespace allocbench::agents
