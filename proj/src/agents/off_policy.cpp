#include "allocbench/agents.hpp"

#include "allocbench/error.hpp"

#include <algorithm>

namespace allocbench::agents {

using Eigen::Index;
using Eigen::VectorXd;
using neuro::Mlp;
using neuro::Tape;
using neuro::Var;

namespace {

/// One Adam step on mean((Q(s, a) - y)^2); returns the pre-step loss.
double regress_critic(Mlp& critic, neuro::Adam& opt, const Batch& batch, const VectorXd& y) {
  Tape tape;
  Mlp::Binding binding;
  Var q = q_value(critic, tape.constant(batch.observations), tape.constant(batch.actions), &binding);
  Var loss = neuro::mean(neuro::square(q - tape.constant(y)));
  const double value = loss.scalar();
  tape.backward(loss);
  VectorXd g = critic.gradient(tape, binding);
  opt.step(critic.params(), g);
  return value;
}

/// One Adam step on -mean(Q(s, actor(s))); returns the pre-step loss.
double improve_actor(Mlp& actor, neuro::Adam& opt, const Mlp& critic, const Batch& batch) {
  Tape tape;
  Mlp::Binding binding;
  Var obs = tape.constant(batch.observations);
  Var a = actor.forward(tape, obs, &binding);
  Var loss = -neuro::mean(q_value(critic, obs, a));
  const double value = loss.scalar();
  tape.backward(loss);
  VectorXd g = actor.gradient(tape, binding);
  opt.step(actor.params(), g);
  return value;
}

void check_noise(const Matrix& noise, const Batch& batch, Index assets) {
  require(noise.rows() == batch.size() && noise.cols() == assets, ErrorKind::Validation,
          "noise shape does not match the batch");
}

}  // namespace

VectorXd ddpg_targets(const DdpgAgent& agent, const Batch& batch) {
  const Matrix next_actions = agent.actor_target.forward_batch(batch.next_observations);
  const VectorXd next_q = q_value(agent.critic_target, batch.next_observations, next_actions);
  const double gamma = agent.config().gamma;
  return (batch.rewards.array() + gamma * (1.0 - batch.done.array()) * next_q.array()).matrix();
}

Losses ddpg_update(DdpgAgent& agent, const Batch& batch) {
  const double tau = agent.config().tau;
  Losses out;
  out.critic = regress_critic(agent.critic, agent.critic_opt, batch, ddpg_targets(agent, batch));
  out.actor = improve_actor(agent.actor, agent.actor_opt, agent.critic, batch);
  out.actor_updated = true;
  neuro::polyak_update(agent.actor_target, agent.actor, tau);
  neuro::polyak_update(agent.critic_target, agent.critic, tau);
  return out;
}

Matrix td3_target_noise(const AgentConfig& cfg, Index rows, Index cols, std::mt19937_64& rng) {
  Matrix eps = neuro::standard_normal(rows, cols, rng);
  return (cfg.target_noise * eps).cwiseMax(-cfg.target_noise_clip).cwiseMin(cfg.target_noise_clip);
}

VectorXd td3_targets(const Td3Agent& agent, const Batch& batch, const Matrix& noise) {
  check_noise(noise, batch, static_cast<Index>(agent.assets()));
  const Matrix next_actions = agent.actor_target.forward_batch(batch.next_observations) + noise;
  const VectorXd q1 = q_value(agent.critic1_target, batch.next_observations, next_actions);
  const VectorXd q2 = q_value(agent.critic2_target, batch.next_observations, next_actions);
  const double gamma = agent.config().gamma;
  return (batch.rewards.array() + gamma * (1.0 - batch.done.array()) * q1.array().min(q2.array())).matrix();
}

Losses td3_update(Td3Agent& agent, const Batch& batch, std::size_t step, std::mt19937_64& rng) {
  const Matrix noise = td3_target_noise(agent.config(), batch.size(), static_cast<Index>(agent.assets()), rng);
  return td3_update_with_noise(agent, batch, step, noise);
}

Losses td3_update_with_noise(Td3Agent& agent, const Batch& batch, std::size_t step, const Matrix& noise) {
  const AgentConfig& cfg = agent.config();
  const VectorXd y = td3_targets(agent, batch, noise);
  Losses out;
  const double l1 = regress_critic(agent.critic1, agent.critic1_opt, batch, y);
  const double l2 = regress_critic(agent.critic2, agent.critic2_opt, batch, y);
  out.critic = 0.5 * (l1 + l2);
  if (step % cfg.policy_delay == 0) {
    out.actor = improve_actor(agent.actor, agent.actor_opt, agent.critic1, batch);
    out.actor_updated = true;
    neuro::polyak_update(agent.actor_target, agent.actor, cfg.tau);
    neuro::polyak_update(agent.critic1_target, agent.critic1, cfg.tau);
    neuro::polyak_update(agent.critic2_target, agent.critic2, cfg.tau);
  }
  return out;
}

VectorXd sac_targets(const SacAgent& agent, const Batch& batch, const Matrix& next_eps) {
  const AgentConfig& cfg = agent.config();
  check_noise(next_eps, batch, static_cast<Index>(agent.assets()));
  Tape tape;
  Var mu = tape.constant(agent.actor.mean.forward_batch(batch.next_observations));
  Var ls = tape.constant(agent.actor.log_std.transpose());
  const SquashedSample s = squashed_sample(mu, ls, next_eps, cfg.sac_action_bound);
  const Matrix next_actions = s.action.value();
  const VectorXd q1 = q_value(agent.critic1_target, batch.next_observations, next_actions);
  const VectorXd q2 = q_value(agent.critic2_target, batch.next_observations, next_actions);
  const VectorXd soft = q1.array().min(q2.array()) - cfg.alpha * s.log_prob.value().col(0).array();
  return (batch.rewards.array() + cfg.gamma * (1.0 - batch.done.array()) * soft.array()).matrix();
}

double sac_actor_loss(const SacAgent& agent, const Batch& batch, const Matrix& eps) {
  check_noise(eps, batch, static_cast<Index>(agent.assets()));
  Tape tape;
  Var obs = tape.constant(batch.observations);
  Var mu = agent.actor.mean.forward(tape, obs);
  const SquashedSample s =
      squashed_sample(mu, tape.constant(agent.actor.log_std.transpose()), eps, agent.config().sac_action_bound);
  Var q = neuro::minimum(q_value(agent.critic1, obs, s.action), q_value(agent.critic2, obs, s.action));
  return neuro::mean(agent.config().alpha * s.log_prob - q).scalar();
}

Losses sac_update(SacAgent& agent, const Batch& batch, std::mt19937_64& rng) {
  const auto n = static_cast<Index>(agent.assets());
  const Matrix next_eps = neuro::standard_normal(batch.size(), n, rng);
  const Matrix eps = neuro::standard_normal(batch.size(), n, rng);
  return sac_update_with_noise(agent, batch, next_eps, eps);
}

Losses sac_update_with_noise(SacAgent& agent, const Batch& batch, const Matrix& next_eps, const Matrix& eps) {
  const AgentConfig& cfg = agent.config();
  check_noise(eps, batch, static_cast<Index>(agent.assets()));
  const VectorXd y = sac_targets(agent, batch, next_eps);
  Losses out;
  const double l1 = regress_critic(agent.critic1, agent.critic1_opt, batch, y);
  const double l2 = regress_critic(agent.critic2, agent.critic2_opt, batch, y);
  out.critic = 0.5 * (l1 + l2);

  {
    Tape tape;
    Mlp::Binding binding;
    Var obs = tape.constant(batch.observations);
    Var mu = agent.actor.mean.forward(tape, obs, &binding);
    Var ls = tape.variable(agent.actor.log_std.transpose());
    const SquashedSample s = squashed_sample(mu, ls, eps, cfg.sac_action_bound);
    Var q = neuro::minimum(q_value(agent.critic1, obs, s.action), q_value(agent.critic2, obs, s.action));
    Var loss = neuro::mean(cfg.alpha * s.log_prob - q);
    out.actor = loss.scalar();
    tape.backward(loss);
    const Index m = agent.actor.mean.params().size();
    const Index n = agent.actor.log_std.size();
    VectorXd params(m + n);
    params << agent.actor.mean.params(), agent.actor.log_std;
    VectorXd grad(m + n);
    grad << agent.actor.mean.gradient(tape, binding), tape.grad(ls).row(0).transpose();
    agent.actor_opt.step(params, grad);
    agent.actor.mean.params() = params.head(m);
    agent.actor.log_std = params.tail(n);
    out.actor_updated = true;
  }
  neuro::polyak_update(agent.critic1_target, agent.critic1, cfg.tau);
  neuro::polyak_update(agent.critic2_target, agent.critic2, cfg.tau);
  return out;
}

}  // namespace allocbench::agents
