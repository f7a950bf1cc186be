#include "allocbench/agents.hpp"

#include "allocbench/error.hpp"
#include "allocbench/weights.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>

namespace allocbench::agents {

using Eigen::Index;
using Eigen::VectorXd;
using neuro::Mlp;
using neuro::Tape;
using neuro::Var;

namespace {

constexpr std::array<std::string_view, 5> kNames = {"a2c", "ppo", "ddpg", "td3", "sac"};
constexpr char kMagic[4] = {'A', 'B', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

Mlp build(const std::vector<std::size_t>& sizes, const AgentConfig& cfg, std::mt19937_64* rng) {
  return rng ? Mlp::glorot(sizes, *rng, cfg.activation) : Mlp(sizes, cfg.activation);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xFFu);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  require(static_cast<bool>(in), ErrorKind::Io, "truncated agent checkpoint");
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
  return v;
}

}  // namespace

std::string_view algorithm_name(Algorithm algorithm) noexcept { return kNames[static_cast<std::size_t>(algorithm)]; }

Algorithm parse_algorithm(std::string_view name) {
  for (std::size_t k = 0; k < kNames.size(); ++k) {
    if (kNames[k] == name) return static_cast<Algorithm>(k);
  }
  fail(ErrorKind::Validation, "unknown algorithm '" + std::string(name) + "' (expected a2c, ppo, ddpg, td3, sac)");
}

bool is_off_policy(Algorithm algorithm) noexcept {
  return algorithm == Algorithm::DDPG || algorithm == Algorithm::TD3 || algorithm == Algorithm::SAC;
}

void AgentConfig::validate() const {
  require(gamma > 0.0 && gamma <= 1.0, ErrorKind::Validation, "gamma must lie in (0, 1]");
  require(tau > 0.0 && tau <= 1.0, ErrorKind::Validation, "tau must lie in (0, 1]");
  require(clip_epsilon > 0.0, ErrorKind::Validation, "clip epsilon must be positive");
  require(policy_delay >= 1, ErrorKind::Validation, "policy delay must be at least 1");
  require(rollout_length >= 1 && ppo_epochs >= 1 && ppo_minibatch >= 1, ErrorKind::Validation,
          "rollout length, epochs and minibatch must be positive");
  require(batch_size >= 1 && buffer_capacity >= batch_size, ErrorKind::Validation,
          "buffer capacity must hold at least one batch");
  require(exploration_noise >= 0.0 && target_noise >= 0.0 && target_noise_clip >= 0.0, ErrorKind::Validation,
          "noise settings must be non-negative");
  require(alpha >= 0.0 && entropy_coef >= 0.0 && value_coef >= 0.0, ErrorKind::Validation,
          "loss coefficients must be non-negative");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, ErrorKind::Validation, "GAE lambda must lie in [0, 1]");
  require(actor_lr > 0.0 && critic_lr > 0.0, ErrorKind::Validation, "learning rates must be positive");
  require(sac_action_bound > 0.0 && reward_scale > 0.0, ErrorKind::Validation,
          "action bound and reward scale must be positive");
  for (std::size_t h : hidden) require(h >= 1, ErrorKind::Validation, "hidden widths must be positive");
}

Batch Batch::stack(const std::vector<Experience>& items) {
  require(!items.empty(), ErrorKind::Validation, "cannot stack an empty batch");
  const auto b = static_cast<Index>(items.size());
  const Index d = items.front().observation.size();
  const Index n = items.front().action.size();
  Batch out;
  out.observations.resize(b, d);
  out.next_observations.resize(b, d);
  out.actions.resize(b, n);
  out.rewards.resize(b);
  out.done.resize(b);
  for (Index k = 0; k < b; ++k) {
    const Experience& e = items[static_cast<std::size_t>(k)];
    require(e.observation.size() == d && e.next_observation.size() == d && e.action.size() == n,
            ErrorKind::Validation, "inconsistent experience shapes");
    out.observations.row(k) = e.observation.transpose();
    out.next_observations.row(k) = e.next_observation.transpose();
    out.actions.row(k) = e.action.transpose();
    out.rewards(k) = e.reward;
    out.done(k) = e.done ? 1.0 : 0.0;
  }
  return out;
}

void Rollout::validate() const {
  require(!steps.empty(), ErrorKind::Validation, "rollout must contain at least one step");
  for (const auto& s : steps) {
    require(std::isfinite(s.reward) && std::isfinite(s.value) && std::isfinite(s.log_prob), ErrorKind::Validation,
            "rollout holds non-finite values");
  }
  require(std::isfinite(bootstrap_value), ErrorKind::Validation, "non-finite bootstrap value");
}

double advantage(double q_value, double v_value) noexcept { return q_value - v_value; }

VectorXd advantage(const VectorXd& q_values, const VectorXd& v_values) {
  require(q_values.size() == v_values.size(), ErrorKind::Validation, "advantage inputs differ in length");
  return q_values - v_values;
}

VectorXd n_step_returns(const Rollout& rollout, double gamma) {
  rollout.validate();
  const auto t = static_cast<Index>(rollout.steps.size());
  VectorXd ret(t);
  double next = rollout.bootstrap_value;
  for (Index k = t - 1; k >= 0; --k) {
    const auto& s = rollout.steps[static_cast<std::size_t>(k)];
    next = s.reward + (s.done ? 0.0 : gamma * next);
    ret(k) = next;
  }
  return ret;
}

GaeResult generalized_advantages(const Rollout& rollout, double gamma, double lambda) {
  rollout.validate();
  const auto t = static_cast<Index>(rollout.steps.size());
  GaeResult out;
  out.advantages.resize(t);
  out.returns.resize(t);
  double running = 0.0;
  for (Index k = t - 1; k >= 0; --k) {
    const auto& s = rollout.steps[static_cast<std::size_t>(k)];
    const double next_value = k + 1 < t ? rollout.steps[static_cast<std::size_t>(k + 1)].value : rollout.bootstrap_value;
    const double live = s.done ? 0.0 : 1.0;
    const double delta = s.reward + gamma * live * next_value - s.value;
    running = delta + gamma * lambda * live * running;
    out.advantages(k) = running;
    out.returns(k) = running + s.value;
  }
  return out;
}

double clipped_surrogate(double ratio, double adv, double epsilon) noexcept {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * adv, clipped * adv);
}

Var clipped_surrogate(Var log_prob_new, const VectorXd& log_prob_old, const VectorXd& adv, double epsilon) {
  require(log_prob_new.cols() == 1 && log_prob_new.rows() == log_prob_old.size() && adv.size() == log_prob_old.size(),
          ErrorKind::Validation, "surrogate inputs differ in length");
  Tape& tape = *log_prob_new.tape();
  Var ratio = neuro::exp(log_prob_new - tape.constant(log_prob_old));
  Var a = tape.constant(adv);
  Var unclipped = ratio * a;
  Var clipped = neuro::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * a;
  return neuro::mean(neuro::minimum(unclipped, clipped));
}

SquashedSample squashed_sample(Var mean, Var log_std, const Matrix& eps, double bound) {
  require(eps.rows() == mean.rows() && eps.cols() == mean.cols(), ErrorKind::Validation,
          "noise shape does not match policy mean");
  Tape& tape = *mean.tape();
  Var ls = neuro::tile_rows(neuro::clamp(log_std, neuro::kLogStdMin, neuro::kLogStdMax), mean.rows());
  Var u = mean + neuro::exp(ls) * tape.constant(eps);
  // log N(u) - log(bound * (1 - tanh(u)^2)), with
  // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)).
  const double c = 0.5 * std::log(2.0 * std::numbers::pi) + std::log(bound) + 2.0 * std::numbers::ln2;
  const Matrix quad = -0.5 * eps.array().square();
  Var per_dim = tape.constant(quad) - ls + 2.0 * u + 2.0 * neuro::softplus(-2.0 * u);
  SquashedSample s;
  s.action = bound * neuro::tanh(u);
  s.log_prob = neuro::add_scalar(neuro::row_sum(per_dim), -c * static_cast<double>(mean.cols()));
  return s;
}

Agent::Agent(AgentConfig cfg, std::size_t observation_size, std::size_t assets)
    : cfg_(std::move(cfg)), observation_size_(observation_size), assets_(assets) {
  cfg_.validate();
  require(assets_ >= 1 && observation_size_ >= 1, ErrorKind::Validation, "agent needs positive dimensions");
}

void Agent::check_observation(const VectorXd& observation) const {
  if (static_cast<std::size_t>(observation.size()) != observation_size_) {
    fail(ErrorKind::Validation, "observation length " + std::to_string(observation.size()) + " does not match " +
                                    std::to_string(observation_size_));
  }
}

bool Agent::parameters_finite() const {
  for (const Mlp* net : networks()) {
    if (!net->params().allFinite()) return false;
  }
  for (const VectorXd* v : vectors()) {
    if (!v->allFinite()) return false;
  }
  return true;
}

VectorXd Agent::flat_parameters() const {
  Index total = 0;
  for (const Mlp* net : networks()) total += net->params().size();
  for (const VectorXd* v : vectors()) total += v->size();
  VectorXd out(total);
  Index at = 0;
  for (const Mlp* net : networks()) {
    out.segment(at, net->params().size()) = net->params();
    at += net->params().size();
  }
  for (const VectorXd* v : vectors()) {
    out.segment(at, v->size()) = *v;
    at += v->size();
  }
  return out;
}

A2cAgent::A2cAgent(AgentConfig cfg, std::size_t observation_size, std::size_t assets, std::mt19937_64* init)
    : Agent(std::move(cfg), observation_size, assets) {
  actor.mean = build(layer_sizes(observation_size, cfg_.hidden, assets), cfg_, init);
  actor.log_std = VectorXd::Constant(static_cast<Index>(assets), cfg_.initial_log_std);
  critic = build(layer_sizes(observation_size, cfg_.hidden, 1), cfg_, init);
  actor_opt = neuro::Adam(static_cast<Index>(actor.mean.parameter_count() + assets), {cfg_.actor_lr});
  critic_opt = neuro::Adam(static_cast<Index>(critic.parameter_count()), {cfg_.critic_lr});
}

VectorXd A2cAgent::act(const VectorXd& observation, bool greedy, std::mt19937_64& rng) const {
  check_observation(observation);
  if (greedy) return actor.mean.forward(observation);
  return neuro::gaussian_sample(actor, observation, rng).action;
}

double A2cAgent::value(const VectorXd& observation) const {
  check_observation(observation);
  return critic.forward(observation)(0);
}

DdpgAgent::DdpgAgent(AgentConfig cfg, std::size_t observation_size, std::size_t assets, std::mt19937_64* init)
    : Agent(std::move(cfg), observation_size, assets) {
  actor = build(layer_sizes(observation_size, cfg_.hidden, assets), cfg_, init);
  critic = build(layer_sizes(observation_size + assets, cfg_.hidden, 1), cfg_, init);
  actor_target = actor;
  critic_target = critic;
  actor_opt = neuro::Adam(static_cast<Index>(actor.parameter_count()), {cfg_.actor_lr});
  critic_opt = neuro::Adam(static_cast<Index>(critic.parameter_count()), {cfg_.critic_lr});
}

VectorXd DdpgAgent::act(const VectorXd& observation, bool greedy, std::mt19937_64& rng) const {
  check_observation(observation);
  VectorXd a = actor.forward(observation);
  if (!greedy) a += cfg_.exploration_noise * neuro::standard_normal(a.size(), rng);
  return a;
}

Td3Agent::Td3Agent(AgentConfig cfg, std::size_t observation_size, std::size_t assets, std::mt19937_64* init)
    : Agent(std::move(cfg), observation_size, assets) {
  actor = build(layer_sizes(observation_size, cfg_.hidden, assets), cfg_, init);
  critic1 = build(layer_sizes(observation_size + assets, cfg_.hidden, 1), cfg_, init);
  critic2 = build(layer_sizes(observation_size + assets, cfg_.hidden, 1), cfg_, init);
  actor_target = actor;
  critic1_target = critic1;
  critic2_target = critic2;
  actor_opt = neuro::Adam(static_cast<Index>(actor.parameter_count()), {cfg_.actor_lr});
  critic1_opt = neuro::Adam(static_cast<Index>(critic1.parameter_count()), {cfg_.critic_lr});
  critic2_opt = neuro::Adam(static_cast<Index>(critic2.parameter_count()), {cfg_.critic_lr});
}

VectorXd Td3Agent::act(const VectorXd& observation, bool greedy, std::mt19937_64& rng) const {
  check_observation(observation);
  VectorXd a = actor.forward(observation);
  if (!greedy) a += cfg_.exploration_noise * neuro::standard_normal(a.size(), rng);
  return a;
}

SacAgent::SacAgent(AgentConfig cfg, std::size_t observation_size, std::size_t assets, std::mt19937_64* init)
    : Agent(std::move(cfg), observation_size, assets) {
  actor.mean = build(layer_sizes(observation_size, cfg_.hidden, assets), cfg_, init);
  actor.log_std = VectorXd::Constant(static_cast<Index>(assets), cfg_.initial_log_std);
  critic1 = build(layer_sizes(observation_size + assets, cfg_.hidden, 1), cfg_, init);
  critic2 = build(layer_sizes(observation_size + assets, cfg_.hidden, 1), cfg_, init);
  critic1_target = critic1;
  critic2_target = critic2;
  actor_opt = neuro::Adam(static_cast<Index>(actor.mean.parameter_count() + assets), {cfg_.actor_lr});
  critic1_opt = neuro::Adam(static_cast<Index>(critic1.parameter_count()), {cfg_.critic_lr});
  critic2_opt = neuro::Adam(static_cast<Index>(critic2.parameter_count()), {cfg_.critic_lr});
}

VectorXd SacAgent::act(const VectorXd& observation, bool greedy, std::mt19937_64& rng) const {
  check_observation(observation);
  VectorXd u = actor.mean.forward(observation);
  if (!greedy) u += actor.stdev().cwiseProduct(neuro::standard_normal(u.size(), rng));
  return cfg_.sac_action_bound * u.array().tanh().matrix();
}

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, std::size_t observation_size, std::size_t assets,
                                  std::mt19937_64* rng) {
  switch (cfg.algorithm) {
    case Algorithm::A2C: return std::make_unique<A2cAgent>(cfg, observation_size, assets, rng);
    case Algorithm::PPO: return std::make_unique<PpoAgent>(cfg, observation_size, assets, rng);
    case Algorithm::DDPG: return std::make_unique<DdpgAgent>(cfg, observation_size, assets, rng);
    case Algorithm::TD3: return std::make_unique<Td3Agent>(cfg, observation_size, assets, rng);
    case Algorithm::SAC: return std::make_unique<SacAgent>(cfg, observation_size, assets, rng);
  }
  fail(ErrorKind::Validation, "unknown algorithm");
}

Var q_value(const Mlp& critic, Var observations, Var raw_actions, Mlp::Binding* binding) {
  return critic.forward(*observations.tape(), neuro::concat_cols(observations, neuro::softmax_rows(raw_actions)),
                        binding);
}

VectorXd q_value(const Mlp& critic, const Matrix& observations, const Matrix& raw_actions) {
  require(observations.rows() == raw_actions.rows(), ErrorKind::Validation, "batch sizes differ");
  Matrix input(observations.rows(), observations.cols() + raw_actions.cols());
  input.leftCols(observations.cols()) = observations;
  for (Index r = 0; r < raw_actions.rows(); ++r) {
    input.row(r).tail(raw_actions.cols()) = softmax(raw_actions.row(r).transpose()).transpose();
  }
  return critic.forward_batch(input).col(0);
}

void save_agent(std::ostream& out, const Agent& agent) {
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(agent.algorithm()));
  const auto nets = agent.networks();
  const auto vecs = agent.vectors();
  write_u32(out, static_cast<std::uint32_t>(nets.size() + vecs.size()));
  for (const Mlp* net : nets) neuro::save_mlp(out, *net);
  for (const VectorXd* v : vecs) neuro::write_block(out, {static_cast<std::uint32_t>(v->size())}, *v);
  require(static_cast<bool>(out), ErrorKind::Io, "failed to write agent checkpoint");
}

std::unique_ptr<Agent> load_agent(std::istream& in, const AgentConfig& cfg, std::size_t observation_size,
                                  std::size_t assets) {
  char magic[4];
  in.read(magic, 4);
  require(static_cast<bool>(in) && std::memcmp(magic, kMagic, 4) == 0, ErrorKind::Parse,
          "not an agent checkpoint");
  require(read_u32(in) == kVersion, ErrorKind::Parse, "unsupported checkpoint version");
  const auto algorithm = static_cast<Algorithm>(read_u32(in));
  require(algorithm == cfg.algorithm, ErrorKind::Validation, "checkpoint algorithm does not match configuration");
  auto agent = make_agent(cfg, observation_size, assets, nullptr);
  const auto nets = agent->networks();
  const auto vecs = agent->vectors();
  require(read_u32(in) == nets.size() + vecs.size(), ErrorKind::Parse, "checkpoint block count mismatch");
  for (Mlp* net : nets) neuro::load_mlp(in, *net);
  for (VectorXd* v : vecs) {
    std::vector<std::uint32_t> dims;
    VectorXd payload;
    neuro::read_block(in, dims, payload);
    require(dims.size() == 1 && payload.size() == v->size(), ErrorKind::Parse, "checkpoint vector size mismatch");
    *v = payload;
  }
  return agent;
}

void write_training_log(std::ostream& out, const Agent& agent) {
  out << "episode,cumulative_reward\n";
  for (std::size_t k = 0; k < agent.episode_rewards.size(); ++k) {
    out << (k + 1) << ',' << market::format_number(agent.episode_rewards[k]) << '\n';
  }
}

VectorXd greedy_weights(const Agent& agent, const VectorXd& observation) {
  std::mt19937_64 unused(0);
  return softmax(agent.act(observation, true, unused));
}

}  // namespace allocbench::agents
