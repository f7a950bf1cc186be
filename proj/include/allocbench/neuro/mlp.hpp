#pragma once

#include "allocbench/neuro/tape.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace allocbench::neuro {

enum class Activation : std::uint32_t { Tanh = 0, Relu = 1 };

/// Dense feed-forward network with hidden activations and a linear output.
///
/// Parameters live in one flat vector, layer by layer: the out x in weight
/// matrix (column-major) followed by the out-length bias.
class Mlp {
 public:
  Mlp() = default;
  /// Zero-initialized network.
  explicit Mlp(std::vector<std::size_t> sizes, Activation activation = Activation::Tanh);

  /// Uniform in +-sqrt(6 / (fan_in + fan_out)) per layer, zero biases.
  static Mlp glorot(std::vector<std::size_t> sizes, std::mt19937_64& rng, Activation activation = Activation::Tanh);

  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  Activation activation() const noexcept { return activation_; }
  std::size_t layers() const noexcept { return sizes_.empty() ? 0 : sizes_.size() - 1; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t parameter_count() const noexcept { return static_cast<std::size_t>(params_.size()); }

  const Eigen::VectorXd& params() const noexcept { return params_; }
  Eigen::VectorXd& params() noexcept { return params_; }

  Eigen::Map<const Matrix> weight(std::size_t layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  /// Rows are samples.
  Matrix forward_batch(const Matrix& inputs) const;

  /// Tape handles for the parameters registered by a differentiable forward.
  struct Binding {
    std::vector<Var> weights;
    std::vector<Var> biases;
  };

  /// Differentiable forward. When `binding` is non-null the parameters are
  /// recorded as variables so gradient() can read them back; otherwise they
  /// are constants and only the input receives gradients.
  Var forward(Tape& tape, Var inputs, Binding* binding = nullptr) const;

  /// Flat gradient in parameter layout after tape.backward().
  Eigen::VectorXd gradient(const Tape& tape, const Binding& binding) const;

  bool same_architecture(const Mlp& other) const noexcept;

 private:
  std::vector<std::size_t> sizes_;
  Activation activation_ = Activation::Tanh;
  Eigen::VectorXd params_;
  std::vector<std::size_t> offsets_;  ///< start of each layer's weights
};

/// target <- tau * online + (1 - tau) * target
void polyak_update(Mlp& target, const Mlp& online, double tau);

/// Checkpoint block: little-endian uint32 dimension count k, k uint32
/// dimensions, then the little-endian float64 payload. Networks store their
/// layer sizes as dimensions; plain vectors store a single dimension.
void write_block(std::ostream& out, const std::vector<std::uint32_t>& dims, const Eigen::VectorXd& payload);
void read_block(std::istream& in, std::vector<std::uint32_t>& dims, Eigen::VectorXd& payload);

void save_mlp(std::ostream& out, const Mlp& net);
/// Reads a block written by save_mlp into `net`, whose architecture must match.
void load_mlp(std::istream& in, Mlp& net);

}  // namespace allocbench::neuro
