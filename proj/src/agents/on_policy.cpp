#include "allocbench/agents.hpp"

#include "allocbench/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace allocbench::agents {

using Eigen::Index;
using Eigen::VectorXd;
using neuro::Mlp;
using neuro::Tape;
using neuro::Var;

namespace {

struct Stacked {
  Matrix observations;
  Matrix actions;
};

Stacked stack_rollout(const Rollout& rollout, const std::vector<Index>& rows) {
  const Index d = rollout.steps.front().observation.size();
  const Index n = rollout.steps.front().action.size();
  Stacked s;
  s.observations.resize(static_cast<Index>(rows.size()), d);
  s.actions.resize(static_cast<Index>(rows.size()), n);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& step = rollout.steps[static_cast<std::size_t>(rows[k])];
    s.observations.row(static_cast<Index>(k)) = step.observation.transpose();
    s.actions.row(static_cast<Index>(k)) = step.action.transpose();
  }
  return s;
}

VectorXd gather(const VectorXd& v, const std::vector<Index>& rows) {
  VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out(static_cast<Index>(k)) = v(rows[k]);
  return out;
}

/// Applies one Adam step to the actor's mean network and log-stdev jointly.
void step_actor(A2cAgent& agent, const VectorXd& mean_grad, const VectorXd& log_std_grad) {
  const Index m = agent.actor.mean.params().size();
  const Index n = agent.actor.log_std.size();
  VectorXd params(m + n);
  params << agent.actor.mean.params(), agent.actor.log_std;
  VectorXd grad(m + n);
  grad << mean_grad, log_std_grad;
  agent.actor_opt.step(params, grad);
  agent.actor.mean.params() = params.head(m);
  agent.actor.log_std = params.tail(n);
}

}  // namespace

Losses a2c_update(A2cAgent& agent, const Rollout& rollout) {
  return a2c_update_with_returns(agent, rollout, n_step_returns(rollout, agent.config().gamma));
}

Losses a2c_update_with_returns(A2cAgent& agent, const Rollout& rollout, const VectorXd& returns) {
  rollout.validate();
  require(returns.size() == static_cast<Index>(rollout.steps.size()), ErrorKind::Validation,
          "returns length does not match rollout");
  std::vector<Index> rows(rollout.steps.size());
  std::iota(rows.begin(), rows.end(), Index{0});
  const Stacked s = stack_rollout(rollout, rows);
  const AgentConfig& cfg = agent.config();
  Losses out;

  // Critic: mean squared advantage.
  VectorXd adv;
  {
    Tape tape;
    Mlp::Binding binding;
    Var v = agent.critic.forward(tape, tape.constant(s.observations), &binding);
    adv = returns - v.value().col(0);
    Var loss = neuro::mean(neuro::square(tape.constant(returns) - v));
    out.critic = loss.scalar();
    tape.backward(loss);
    VectorXd g = agent.critic.gradient(tape, binding);
    agent.critic_opt.step(agent.critic.params(), g);
  }

  // Actor: -mean(log pi(a|s) * A) - entropy_coef * H, advantages held fixed.
  {
    Tape tape;
    Mlp::Binding binding;
    Var mu = agent.actor.mean.forward(tape, tape.constant(s.observations), &binding);
    Var ls = tape.variable(agent.actor.log_std.transpose());
    Var lsc = neuro::clamp(ls, neuro::kLogStdMin, neuro::kLogStdMax);
    Var logp = neuro::gaussian_log_prob(mu, lsc, s.actions);
    Var loss = -neuro::mean(logp * tape.constant(adv));
    if (cfg.entropy_coef > 0.0) loss = loss - cfg.entropy_coef * neuro::gaussian_entropy(lsc);
    out.actor = loss.scalar();
    tape.backward(loss);
    step_actor(agent, agent.actor.mean.gradient(tape, binding), tape.grad(ls).row(0).transpose());
    out.actor_updated = true;
  }
  return out;
}

PpoTerms ppo_minibatch_loss(Tape& tape, const PpoAgent& agent, const Matrix& observations, const Matrix& actions,
                            const VectorXd& old_log_probs, const VectorXd& advantages, const VectorXd& returns,
                            Mlp::Binding* actor_binding, Var* log_std_var, Mlp::Binding* critic_binding) {
  const AgentConfig& cfg = agent.config();
  Var obs = tape.constant(observations);
  Var mu = agent.actor.mean.forward(tape, obs, actor_binding);
  Var ls = log_std_var ? tape.variable(agent.actor.log_std.transpose()) : tape.constant(agent.actor.log_std.transpose());
  if (log_std_var) *log_std_var = ls;
  Var lsc = neuro::clamp(ls, neuro::kLogStdMin, neuro::kLogStdMax);
  Var logp = neuro::gaussian_log_prob(mu, lsc, actions);

  PpoTerms t;
  t.surrogate = clipped_surrogate(logp, old_log_probs, advantages, cfg.clip_epsilon);
  Var v = agent.critic.forward(tape, obs, critic_binding);
  t.value_loss = neuro::mean(neuro::square(v - tape.constant(returns)));
  t.entropy = neuro::gaussian_entropy(lsc);
  t.loss = cfg.value_coef * t.value_loss - t.surrogate - cfg.entropy_coef * t.entropy;
  return t;
}

Losses ppo_update(PpoAgent& agent, const Rollout& rollout, std::mt19937_64& rng) {
  const AgentConfig& cfg = agent.config();
  GaeResult gae = generalized_advantages(rollout, cfg.gamma, cfg.gae_lambda);
  VectorXd adv = gae.advantages;
  if (adv.size() > 1) {
    const double m = adv.mean();
    const double sd = std::sqrt((adv.array() - m).square().sum() / static_cast<double>(adv.size() - 1));
    adv = (adv.array() - m) / (sd + 1e-8);
  }
  VectorXd old_logp(static_cast<Index>(rollout.steps.size()));
  for (std::size_t k = 0; k < rollout.steps.size(); ++k) old_logp(static_cast<Index>(k)) = rollout.steps[k].log_prob;

  std::vector<Index> order(rollout.steps.size());
  std::iota(order.begin(), order.end(), Index{0});
  const std::size_t mb = std::min(cfg.ppo_minibatch, order.size());

  Losses out;
  std::size_t batches = 0;
  for (std::size_t epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::vector<Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(std::min(start + mb, order.size())));
      const Stacked s = stack_rollout(rollout, rows);
      Tape tape;
      Mlp::Binding ab;
      Mlp::Binding cb;
      Var ls;
      PpoTerms t = ppo_minibatch_loss(tape, agent, s.observations, s.actions, gather(old_logp, rows),
                                      gather(adv, rows), gather(gae.returns, rows), &ab, &ls, &cb);
      tape.backward(t.loss);
      step_actor(agent, agent.actor.mean.gradient(tape, ab), tape.grad(ls).row(0).transpose());
      VectorXd gc = agent.critic.gradient(tape, cb);
      agent.critic_opt.step(agent.critic.params(), gc);
      out.actor += -t.surrogate.scalar() - cfg.entropy_coef * t.entropy.scalar();
      out.critic += t.value_loss.scalar();
      ++batches;
    }
  }
  out.actor /= static_cast<double>(batches);
  out.critic /= static_cast<double>(batches);
  out.actor_updated = true;
  return out;
}

}  // namespace allocbench::agents
