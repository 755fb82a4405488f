#pragma once

#include <cstddef>
#include <vector>

#include "bgpo/rng.hpp"
#include "bgpo/types.hpp"

namespace bgpo {

/// Layer sizes (input, hidden..., output) of a tanh MLP with a linear output.
struct MlpSpec {
  std::vector<std::size_t> layer_sizes;

  /// Throws std::invalid_argument unless there are >= 2 layers, all >= 1.
  void validate() const;
  std::size_t num_layers() const { return layer_sizes.size() - 1; }
  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  std::size_t num_params() const;
};

/// Unpacked weights; W[l] has shape (out_l x in_l).
struct MlpWeights {
  std::vector<RowMatrix> weights;
  std::vector<Eigen::VectorXd> biases;
};

/// Flattening order: for each layer in turn, W row-major, then b.
ParamVector flatten(const MlpWeights& weights);
MlpWeights unflatten(const MlpSpec& spec, const Eigen::Ref<const ParamVector>& params);

/// Stateless MLP evaluator over a flat parameter vector. Hidden layers use
/// tanh; the output layer is linear.
class Mlp {
 public:
  /// Post-activation outputs of every layer, input first.
  struct Tape {
    std::vector<Eigen::VectorXd> activations;
  };

  explicit Mlp(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  std::size_t num_params() const { return num_params_; }

  /// Uniform(-r, r) weights with r = sqrt(6 / (fan_in + fan_out)); zero biases.
  ParamVector init_params(Rng& rng) const;

  Eigen::VectorXd forward(const Eigen::Ref<const ParamVector>& params,
                          const Eigen::Ref<const Eigen::VectorXd>& input) const;
  Eigen::VectorXd forward(const Eigen::Ref<const ParamVector>& params,
                          const Eigen::Ref<const Eigen::VectorXd>& input, Tape& tape) const;

  /// Reverse pass: grad += scale * (d output / d params)^T grad_output, with
  /// the activations recorded in `tape` by forward().
  void accumulate_gradient(const Eigen::Ref<const ParamVector>& params, const Tape& tape,
                           const Eigen::Ref<const Eigen::VectorXd>& grad_output, double scale,
                           Eigen::Ref<ParamVector> grad) const;

 private:
  MlpSpec spec_;
  std::size_t num_params_;
  std::vector<Eigen::Index> offsets_;  // start of each layer's W block
};

}  // namespace bgpo
