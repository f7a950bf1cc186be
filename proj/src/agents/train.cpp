#include "allocbench/agents.hpp"

#include "allocbench/error.hpp"
#include "allocbench/neuro/replay_buffer.hpp"

#include <cmath>
#include <sstream>

namespace allocbench::agents {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

constexpr double kLossLimit = 1e6;

void guard(const Agent& agent, const Losses& losses, std::size_t step) {
  const bool bad_loss = !std::isfinite(losses.actor) || !std::isfinite(losses.critic) ||
                        std::abs(losses.actor) > kLossLimit || std::abs(losses.critic) > kLossLimit;
  if (bad_loss || !agent.parameters_finite()) {
    std::ostringstream msg;
    msg << algorithm_name(agent.algorithm()) << " training diverged at step " << step << " (seed "
        << agent.config().seed << ", actor loss " << losses.actor << ", critic loss " << losses.critic << ")";
    throw TrainingDiverged(msg.str(), agent.config().seed, static_cast<long long>(step));
  }
}

void train_off_policy(Agent& agent, const env::Environment& env, std::mt19937_64& rng, double reward_scale) {
  const AgentConfig& cfg = agent.config();
  neuro::ReplayBuffer<Experience> buffer(cfg.buffer_capacity);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  const auto n = static_cast<Index>(env.assets());

  env::EnvState state = env.reset();
  double episode = 0.0;
  std::size_t updates = 0;
  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    VectorXd action(n);
    if (step < cfg.warmup_steps) {
      for (Index i = 0; i < n; ++i) action(i) = uniform(rng);
    } else {
      action = agent.act(state.observation, false, rng);
    }
    const env::Transition tr = env.step(state, action);
    buffer.push({state.observation, action, tr.reward * reward_scale, tr.next_state.observation, tr.done});
    episode += tr.reward;

    if (step >= cfg.warmup_steps && buffer.size() >= cfg.batch_size) {
      const Batch batch = Batch::stack(buffer.sample(cfg.batch_size, rng));
      Losses losses;
      switch (agent.algorithm()) {
        case Algorithm::DDPG: losses = ddpg_update(static_cast<DdpgAgent&>(agent), batch); break;
        case Algorithm::TD3: losses = td3_update(static_cast<Td3Agent&>(agent), batch, updates, rng); break;
        case Algorithm::SAC: losses = sac_update(static_cast<SacAgent&>(agent), batch, rng); break;
        default: fail(ErrorKind::Validation, "not an off-policy algorithm");
      }
      ++updates;
      guard(agent, losses, step);
    }

    if (tr.done) {
      agent.episode_rewards.push_back(episode);
      episode = 0.0;
      state = env.reset();
    } else {
      state = tr.next_state;
    }
  }
}

void train_on_policy(A2cAgent& agent, const env::Environment& env, std::mt19937_64& rng, double reward_scale) {
  const AgentConfig& cfg = agent.config();
  env::EnvState state = env.reset();
  double episode = 0.0;
  std::size_t step = 0;
  while (step < cfg.total_steps) {
    Rollout rollout;
    rollout.steps.reserve(cfg.rollout_length);
    while (rollout.steps.size() < cfg.rollout_length && step < cfg.total_steps) {
      const neuro::GaussianSample sample = neuro::gaussian_sample(agent.actor, state.observation, rng);
      const double value = agent.value(state.observation);
      const env::Transition tr = env.step(state, sample.action);
      rollout.steps.push_back(
          {state.observation, sample.action, tr.reward * reward_scale, sample.log_prob, value, tr.done});
      episode += tr.reward;
      ++step;
      if (tr.done) {
        agent.episode_rewards.push_back(episode);
        episode = 0.0;
        state = env.reset();
      } else {
        state = tr.next_state;
      }
    }
    rollout.bootstrap_value = rollout.steps.back().done ? 0.0 : agent.value(state.observation);
    const Losses losses = agent.algorithm() == Algorithm::PPO
                              ? ppo_update(static_cast<PpoAgent&>(agent), rollout, rng)
                              : a2c_update(agent, rollout);
    guard(agent, losses, step);
  }
}

}  // namespace

std::unique_ptr<Agent> train(const AgentConfig& cfg, const market::PriceFrame& frame, const env::EnvConfig& env_cfg) {
  cfg.validate();
  const env::Environment env(frame, env_cfg);
  std::mt19937_64 rng(cfg.seed);
  auto agent = make_agent(cfg, env.observation_size(), env.assets(), &rng);
  const double reward_scale = cfg.reward_scale / env_cfg.initial_value;
  if (is_off_policy(cfg.algorithm)) {
    train_off_policy(*agent, env, rng, reward_scale);
  } else {
    train_on_policy(static_cast<A2cAgent&>(*agent), env, rng, reward_scale);
  }
  return agent;
}

}  // namespace allocbench::agents
