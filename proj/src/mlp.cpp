#include "bgpo/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace bgpo {

using ConstRowMap = Eigen::Map<const RowMatrix>;

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("MlpSpec needs at least an input and an output layer");
  }
  for (auto size : layer_sizes) {
    if (size < 1) throw std::invalid_argument("MlpSpec layer sizes must be >= 1");
  }
}

std::size_t MlpSpec::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    n += layer_sizes[l + 1] * layer_sizes[l] + layer_sizes[l + 1];
  }
  return n;
}

ParamVector flatten(const MlpWeights& weights) {
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < weights.weights.size(); ++l) {
    total += weights.weights[l].size() + weights.biases[l].size();
  }
  ParamVector out(total);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < weights.weights.size(); ++l) {
    const auto& w = weights.weights[l];
    out.segment(at, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    at += w.size();
    out.segment(at, weights.biases[l].size()) = weights.biases[l];
    at += weights.biases[l].size();
  }
  return out;
}

MlpWeights unflatten(const MlpSpec& spec, const Eigen::Ref<const ParamVector>& params) {
  spec.validate();
  if (params.size() != static_cast<Eigen::Index>(spec.num_params())) {
    throw std::invalid_argument("unflatten: parameter count does not match MlpSpec");
  }
  MlpWeights out;
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto rows = static_cast<Eigen::Index>(spec.layer_sizes[l + 1]);
    const auto cols = static_cast<Eigen::Index>(spec.layer_sizes[l]);
    out.weights.emplace_back(ConstRowMap(params.data() + at, rows, cols));
    at += rows * cols;
    out.biases.emplace_back(params.segment(at, rows));
    at += rows;
  }
  return out;
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  num_params_ = spec_.num_params();
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < spec_.num_layers(); ++l) {
    offsets_.push_back(at);
    at += static_cast<Eigen::Index>(spec_.layer_sizes[l + 1] * (spec_.layer_sizes[l] + 1));
  }
}

ParamVector Mlp::init_params(Rng& rng) const {
  ParamVector params = ParamVector::Zero(static_cast<Eigen::Index>(num_params_));
  for (std::size_t l = 0; l < spec_.num_layers(); ++l) {
    const auto fan_in = spec_.layer_sizes[l];
    const auto fan_out = spec_.layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) {
      params[offsets_[l] + static_cast<Eigen::Index>(i)] = dist(rng);
    }
  }
  return params;
}

Eigen::VectorXd Mlp::forward(const Eigen::Ref<const ParamVector>& params,
                             const Eigen::Ref<const Eigen::VectorXd>& input) const {
  Tape tape;
  return forward(params, input, tape);
}

Eigen::VectorXd Mlp::forward(const Eigen::Ref<const ParamVector>& params,
                             const Eigen::Ref<const Eigen::VectorXd>& input, Tape& tape) const {
  if (params.size() != static_cast<Eigen::Index>(num_params_)) {
    throw std::invalid_argument("Mlp::forward: wrong parameter count");
  }
  if (input.size() != static_cast<Eigen::Index>(spec_.input_size())) {
    throw std::invalid_argument("Mlp::forward: wrong input size");
  }
  const std::size_t layers = spec_.num_layers();
  tape.activations.resize(layers + 1);
  tape.activations[0] = input;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto rows = static_cast<Eigen::Index>(spec_.layer_sizes[l + 1]);
    const auto cols = static_cast<Eigen::Index>(spec_.layer_sizes[l]);
    ConstRowMap w(params.data() + offsets_[l], rows, cols);
    auto b = params.segment(offsets_[l] + rows * cols, rows);
    Eigen::VectorXd z = w * tape.activations[l] + b;
    if (l + 1 < layers) {
      z = z.array().tanh();
    }
    tape.activations[l + 1] = std::move(z);
  }
  return tape.activations.back();
}

void Mlp::accumulate_gradient(const Eigen::Ref<const ParamVector>& params, const Tape& tape,
                              const Eigen::Ref<const Eigen::VectorXd>& grad_output, double scale,
                              Eigen::Ref<ParamVector> grad) const {
  const std::size_t layers = spec_.num_layers();
  Eigen::VectorXd delta = scale * grad_output;
  for (std::size_t l = layers; l-- > 0;) {
    const auto rows = static_cast<Eigen::Index>(spec_.layer_sizes[l + 1]);
    const auto cols = static_cast<Eigen::Index>(spec_.layer_sizes[l]);
    const auto& input = tape.activations[l];
    Eigen::Map<RowMatrix> grad_w(grad.data() + offsets_[l], rows, cols);
    grad_w.noalias() += delta * input.transpose();
    grad.segment(offsets_[l] + rows * cols, rows) += delta;
    if (l == 0) break;
    ConstRowMap w(params.data() + offsets_[l], rows, cols);
    // input is tanh(z) of the previous layer; d tanh = 1 - tanh^2.
    delta = ((w.transpose() * delta).array() * (1.0 - input.array().square())).matrix();
  }
}

}  // namespace bgpo
