#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "smoothar/mol.hpp"
#include "smoothar/rng.hpp"
#include "smoothar/tape.hpp"
#include "smoothar/tensor.hpp"

namespace smoothar {

enum class Activation { Relu, Tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct MadeConfig {
  std::size_t input_dim = 1;              // D
  std::size_t cond_dim = 0;               // C, 0 for an unconditional model
  std::vector<std::size_t> hidden_sizes;  // may be empty
  std::size_t num_components = 1;        // K
  Activation activation = Activation::Relu;
  // ordering[j] is the 1-based position of x_j; empty means identity.
  std::vector<std::size_t> ordering;

  void validate() const;
  std::size_t output_width() const { return input_dim * 3 * num_components; }
  std::vector<std::size_t> resolved_ordering() const;

  friend bool operator==(const MadeConfig&, const MadeConfig&) = default;
};

// One masked affine layer. Weights are stored [fan_in, fan_out] so a batch
// row vector multiplies from the left; mask has the weight's shape.
struct MadeLayer {
  Tensor weight;
  Tensor bias;
  Tensor mask;
};

// Masked autoencoder producing, for every dimension i, mixture-of-logistics
// parameters that depend only on the conditioning inputs and on the x_j
// preceding x_i in the ordering.
//
// Conditioning inputs sit in front of x with degree 0, so every hidden unit
// may read them. With C > 0 hidden degrees cycle over 0..D-1 (a degree-0
// unit sees only the conditioning block, which the first output needs);
// unconditional models cycle over 1..max(D-1, 1).
class MadeModel {
 public:
  MadeModel() = default;
  // Glorot-uniform weights, zero biases apart from the output mean biases,
  // which are spread over [-1, 1] so mixture components start distinct.
  MadeModel(MadeConfig config, Rng& rng);
  // Restores a model from explicit layers; masks must match the config.
  MadeModel(MadeConfig config, std::vector<MadeLayer> layers);

  const MadeConfig& config() const { return config_; }
  const std::vector<MadeLayer>& layers() const { return layers_; }
  std::size_t input_dim() const { return config_.input_dim; }
  std::size_t cond_dim() const { return config_.cond_dim; }
  std::size_t parameter_count() const;

  // Degrees of the network inputs ([cond..., x...]) and of each hidden layer.
  const std::vector<std::size_t>& input_degrees() const { return input_degrees_; }
  const std::vector<std::vector<std::size_t>>& hidden_degrees() const { return hidden_degrees_; }

  // Trainable tensors in the order W0, b0, W1, b1, ...
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

  // Places every parameter on the tape, as variables when `trainable`.
  std::vector<diff::Var> bind(diff::Tape& tape, bool trainable) const;
  // Raw network output [N, D*3K] for input [N, C+D].
  diff::Var forward(diff::Tape& tape, const diff::Var& input, std::span<const diff::Var> params) const;
  // Per-row log p(x | cond), shape [N]. `cond` is ignored when C == 0.
  diff::Var log_prob(diff::Tape& tape, const diff::Var& cond, const diff::Var& x,
                     std::span<const diff::Var> params) const;

  // Untracked conveniences. `cond` is [N, C] (any value with C == 0).
  Tensor output(const Tensor& cond, const Tensor& x) const;
  std::vector<double> log_prob(const Tensor& cond, const Tensor& x) const;
  double log_prob(std::span<const double> cond, std::span<const double> x) const;
  // Mixture parameters of every conditional for one row.
  std::vector<MoLParams> conditionals(std::span<const double> cond, std::span<const double> x) const;
  // d log p(x | cond) / dx per row, shape [N, D].
  Tensor grad_log_prob_wrt_input(const Tensor& cond, const Tensor& x) const;
  // Ancestral sampling: D forward passes, one dimension per pass.
  Tensor sample(const Tensor& cond, std::size_t n, Rng& rng) const;

 private:
  void build_degrees();
  std::vector<Tensor> build_masks() const;
  void check_inputs(const Tensor& cond, const Tensor& x) const;

  MadeConfig config_;
  std::vector<MadeLayer> layers_;
  std::vector<std::size_t> input_degrees_;
  std::vector<std::vector<std::size_t>> hidden_degrees_;
  std::vector<std::size_t> output_degrees_;
};

}  // namespace smoothar
