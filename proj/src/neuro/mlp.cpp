#include "allocbench/neuro/mlp.hpp"

#include "allocbench/error.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace allocbench::neuro {

using Eigen::Index;
using Eigen::VectorXd;

Mlp::Mlp(std::vector<std::size_t> sizes, Activation activation)
    : sizes_(std::move(sizes)), activation_(activation) {
  require(sizes_.size() >= 2, ErrorKind::Validation, "network needs an input and an output size");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    require(sizes_[l] >= 1 && sizes_[l + 1] >= 1, ErrorKind::Validation, "layer widths must be positive");
    offsets_.push_back(total);
    total += (sizes_[l] + 1) * sizes_[l + 1];
  }
  params_ = VectorXd::Zero(static_cast<Index>(total));
}

Mlp Mlp::glorot(std::vector<std::size_t> sizes, std::mt19937_64& rng, Activation activation) {
  Mlp net(std::move(sizes), activation);
  for (std::size_t l = 0; l < net.layers(); ++l) {
    const double fan_in = static_cast<double>(net.sizes_[l]);
    const double fan_out = static_cast<double>(net.sizes_[l + 1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    const auto count = static_cast<Index>(net.sizes_[l] * net.sizes_[l + 1]);
    for (Index k = 0; k < count; ++k) net.params_(static_cast<Index>(net.offsets_[l]) + k) = dist(rng);
  }
  return net;
}

Eigen::Map<const Matrix> Mlp::weight(std::size_t layer) const {
  return {params_.data() + offsets_[layer], static_cast<Index>(sizes_[layer + 1]), static_cast<Index>(sizes_[layer])};
}

Eigen::Map<const VectorXd> Mlp::bias(std::size_t layer) const {
  return {params_.data() + offsets_[layer] + sizes_[layer] * sizes_[layer + 1], static_cast<Index>(sizes_[layer + 1])};
}

VectorXd Mlp::forward(const VectorXd& input) const {
  Matrix row = input.transpose();
  return forward_batch(row).row(0).transpose();
}

Matrix Mlp::forward_batch(const Matrix& inputs) const {
  if (static_cast<std::size_t>(inputs.cols()) != input_size()) {
    fail(ErrorKind::Validation, "network expects input width " + std::to_string(input_size()) + ", got " +
                                    std::to_string(inputs.cols()));
  }
  Matrix h = inputs;
  for (std::size_t l = 0; l < layers(); ++l) {
    Matrix z = h * weight(l).transpose();
    z.rowwise() += bias(l).transpose();
    if (l + 1 < layers()) {
      if (activation_ == Activation::Tanh) {
        z = z.array().tanh();
      } else {
        z = z.cwiseMax(0.0);
      }
    }
    h = std::move(z);
  }
  return h;
}

Var Mlp::forward(Tape& tape, Var inputs, Binding* binding) const {
  if (static_cast<std::size_t>(inputs.cols()) != input_size()) {
    fail(ErrorKind::Validation, "network expects input width " + std::to_string(input_size()) + ", got " +
                                    std::to_string(inputs.cols()));
  }
  if (binding) {
    binding->weights.clear();
    binding->biases.clear();
  }
  Var h = inputs;
  for (std::size_t l = 0; l < layers(); ++l) {
    Var w = binding ? tape.variable(weight(l)) : tape.constant(weight(l));
    Var b = binding ? tape.variable(bias(l)) : tape.constant(bias(l));
    if (binding) {
      binding->weights.push_back(w);
      binding->biases.push_back(b);
    }
    h = linear(h, w, b);
    if (l + 1 < layers()) h = activation_ == Activation::Tanh ? tanh(h) : relu(h);
  }
  return h;
}

VectorXd Mlp::gradient(const Tape& tape, const Binding& binding) const {
  require(binding.weights.size() == layers() && binding.biases.size() == layers(), ErrorKind::Validation,
          "binding does not match network");
  VectorXd g(params_.size());
  for (std::size_t l = 0; l < layers(); ++l) {
    const auto out = static_cast<Index>(sizes_[l + 1]);
    const auto in = static_cast<Index>(sizes_[l]);
    const Matrix gw = tape.grad(binding.weights[l]);
    const Matrix gb = tape.grad(binding.biases[l]);
    Eigen::Map<Matrix>(g.data() + offsets_[l], out, in) = gw;
    g.segment(static_cast<Index>(offsets_[l]) + out * in, out) = gb.col(0);
  }
  return g;
}

bool Mlp::same_architecture(const Mlp& other) const noexcept {
  return sizes_ == other.sizes_ && activation_ == other.activation_;
}

void polyak_update(Mlp& target, const Mlp& online, double tau) {
  require(target.same_architecture(online), ErrorKind::Validation, "Polyak update between different architectures");
  require(tau > 0.0 && tau <= 1.0, ErrorKind::Validation, "Polyak tau must lie in (0, 1]");
  if (tau == 1.0) {
    target.params() = online.params();
    return;
  }
  target.params() = tau * online.params() + (1.0 - tau) * target.params();
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xFFu);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xFFu);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  require(in.gcount() == 4, ErrorKind::Io, "truncated checkpoint header");
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  require(in.gcount() == 8, ErrorKind::Io, "truncated checkpoint payload");
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  double v = 0.0;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::size_t payload_size(const std::vector<std::uint32_t>& dims) {
  if (dims.size() == 1) return dims[0];
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) total += (static_cast<std::size_t>(dims[l]) + 1) * dims[l + 1];
  return total;
}

}  // namespace

void write_block(std::ostream& out, const std::vector<std::uint32_t>& dims, const VectorXd& payload) {
  require(!dims.empty(), ErrorKind::Validation, "checkpoint block needs at least one dimension");
  require(payload_size(dims) == static_cast<std::size_t>(payload.size()), ErrorKind::Validation,
          "checkpoint payload does not match its dimensions");
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_u32(out, d);
  for (Index k = 0; k < payload.size(); ++k) put_f64(out, payload(k));
  require(static_cast<bool>(out), ErrorKind::Io, "checkpoint write failed");
}

void read_block(std::istream& in, std::vector<std::uint32_t>& dims, VectorXd& payload) {
  const std::uint32_t count = get_u32(in);
  require(count >= 1 && count <= 64, ErrorKind::Io, "corrupt checkpoint block header");
  dims.resize(count);
  for (auto& d : dims) d = get_u32(in);
  const std::size_t n = payload_size(dims);
  payload.resize(static_cast<Index>(n));
  for (std::size_t k = 0; k < n; ++k) payload(static_cast<Index>(k)) = get_f64(in);
}

void save_mlp(std::ostream& out, const Mlp& net) {
  std::vector<std::uint32_t> dims(net.sizes().begin(), net.sizes().end());
  write_block(out, dims, net.params());
}

void load_mlp(std::istream& in, Mlp& net) {
  std::vector<std::uint32_t> dims;
  VectorXd payload;
  read_block(in, dims, payload);
  const std::vector<std::size_t> sizes(dims.begin(), dims.end());
  require(sizes == net.sizes(), ErrorKind::Validation, "checkpoint layer sizes do not match the network");
  net.params() = std::move(payload);
}

}  // namespace allocbench::neuro
