#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "lobexec/rng.hpp"

namespace lobexec::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Backward called with a cache recorded under different parameters.
struct StaleCache : std::logic_error {
  using std::logic_error::logic_error;
};

struct Layer {
  Matrix weight; ///< out x in
  Vector bias;
};

/// Activations recorded by a forward pass. Column j of each matrix belongs
/// to sample j.
struct ForwardCache {
  std::vector<Matrix> inputs; ///< input of every layer
  std::vector<Matrix> hidden; ///< tanh outputs of the hidden layers
  std::uint64_t version = 0;
};

/// Dense feed-forward network: tanh on hidden layers, identity on the output.
class Mlp {
public:
  Mlp() = default;
  /// Zero-initialized network with the given layer widths (input first).
  explicit Mlp(std::vector<int> dims);

  const std::vector<int>& dims() const noexcept { return dims_; }
  int input_dim() const noexcept { return dims_.empty() ? 0 : dims_.front(); }
  int output_dim() const noexcept { return dims_.empty() ? 0 : dims_.back(); }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t parameter_count() const noexcept { return parameter_count_; }

  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  /// Mutable access invalidates outstanding caches.
  Layer& mutable_layer(std::size_t i);

  Vector forward(const Vector& x) const;
  /// Batched forward; one sample per column.
  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, ForwardCache& cache) const;

  /// Accumulates dLoss/dparams (flat layout) into `grads` and returns
  /// dLoss/dinput, given dLoss/doutput for each cached sample.
  Matrix backward(const ForwardCache& cache, const Matrix& output_grad, Vector& grads) const;

  /// Flat layout: per layer, weights column-major then bias.
  Vector parameters() const;
  void set_parameters(const Vector& flat);
  bool all_finite() const;

  /// Identifies the current parameter values; changes on every mutation.
  std::uint64_t version() const noexcept { return version_; }

private:
  void check_input(Eigen::Index rows) const;

  std::vector<int> dims_;
  std::vector<Layer> layers_;
  std::size_t parameter_count_ = 0;
  std::uint64_t version_ = 0;
};

/// QR-based (semi-)orthogonal matrix with signs fixed by diag(R), times gain.
Matrix orthogonal_init(int rows, int cols, double gain, Rng& rng);

/// Orthogonal weights with `hidden_gain` on every layer but the last, which
/// gets `output_gain` and bias `output_bias`; hidden biases are zero.
Mlp make_orthogonal_mlp(const std::vector<int>& dims, double hidden_gain, double output_gain,
                        const Vector& output_bias, Rng& rng);

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
public:
  Adam() = default;
  Adam(std::size_t size, AdamConfig cfg = {});

  /// params -= lr * mhat / (sqrt(vhat) + eps), with bias-corrected moments.
  void step(Vector& params, const Vector& grads);

  const AdamConfig& config() const noexcept { return cfg_; }
  std::int64_t steps() const noexcept { return t_; }
  const Vector& first_moment() const noexcept { return m_; }
  const Vector& second_moment() const noexcept { return v_; }

  friend void to_json(nlohmann::json& j, const Adam& a);
  friend void from_json(const nlohmann::json& j, Adam& a);

private:
  AdamConfig cfg_;
  Vector m_;
  Vector v_;
  std::int64_t t_ = 0;
};

void to_json(nlohmann::json& j, const Mlp& net);
void from_json(const nlohmann::json& j, Mlp& net);

} // namespace lobexec::nn
