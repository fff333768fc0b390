#include "smoothar/made.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smoothar/error.hpp"

namespace smoothar {

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + name + "' (expected relu|tanh)");
}

void MadeConfig::validate() const {
  if (input_dim < 1) throw ConfigError("MADE input dimension must be >= 1");
  if (num_components < 1) throw ConfigError("MADE needs at least one mixture component");
  for (std::size_t h : hidden_sizes)
    if (h == 0) throw ConfigError("MADE hidden sizes must be positive");
  if (!ordering.empty()) {
    if (ordering.size() != input_dim) throw ConfigError("MADE ordering length must equal the input dimension");
    std::vector<std::size_t> sorted = ordering;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
      if (sorted[i] != i + 1) throw ConfigError("MADE ordering must be a permutation of 1..D");
  }
}

std::vector<std::size_t> MadeConfig::resolved_ordering() const {
  if (!ordering.empty()) return ordering;
  std::vector<std::size_t> identity(input_dim);
  std::iota(identity.begin(), identity.end(), std::size_t{1});
  return identity;
}

void MadeModel::build_degrees() {
  const std::size_t d = config_.input_dim;
  const std::size_t c = config_.cond_dim;
  const std::vector<std::size_t> order = config_.resolved_ordering();

  input_degrees_.assign(c, 0);
  input_degrees_.insert(input_degrees_.end(), order.begin(), order.end());

  hidden_degrees_.clear();
  for (std::size_t width : config_.hidden_sizes) {
    std::vector<std::size_t> deg(width);
    for (std::size_t u = 0; u < width; ++u) {
      deg[u] = c > 0 ? u % d : 1 + u % std::max<std::size_t>(d - 1, 1);
    }
    hidden_degrees_.push_back(std::move(deg));
  }

  const std::size_t width = 3 * config_.num_components;
  output_degrees_.resize(d * width);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < width; ++j) output_degrees_[i * width + j] = order[i];
}

std::vector<Tensor> MadeModel::build_masks() const {
  std::vector<Tensor> masks;
  const std::vector<std::size_t>* prev = &input_degrees_;
  auto make = [&](const std::vector<std::size_t>& out, bool strict) {
    Tensor m(Shape{prev->size(), out.size()});
    for (std::size_t i = 0; i < prev->size(); ++i)
      for (std::size_t o = 0; o < out.size(); ++o) {
        const bool on = strict ? out[o] > (*prev)[i] : out[o] >= (*prev)[i];
        m.at(i, o) = on ? 1.0 : 0.0;
      }
    return m;
  };
  for (const auto& deg : hidden_degrees_) {
    masks.push_back(make(deg, false));
    prev = &deg;
  }
  masks.push_back(make(output_degrees_, true));
  return masks;
}

MadeModel::MadeModel(MadeConfig config, Rng& rng) : config_(std::move(config)) {
  config_.validate();
  build_degrees();
  std::vector<Tensor> masks = build_masks();
  for (Tensor& mask : masks) {
    const std::size_t fan_in = mask.shape()[0];
    const std::size_t fan_out = mask.shape()[1];
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w(mask.shape());
    for (double& v : w.data()) v = rng.uniform(-a, a);
    layers_.push_back({std::move(w), Tensor(Shape{fan_out}), std::move(mask)});
  }
  const std::size_t k = config_.num_components;
  if (k > 1) {
    Tensor& bias = layers_.back().bias;
    for (std::size_t i = 0; i < config_.input_dim; ++i)
      for (std::size_t c = 0; c < k; ++c)
        bias[i * 3 * k + k + c] = -1.0 + 2.0 * static_cast<double>(c) / static_cast<double>(k - 1);
  }
}

MadeModel::MadeModel(MadeConfig config, std::vector<MadeLayer> layers)
    : config_(std::move(config)), layers_(std::move(layers)) {
  config_.validate();
  build_degrees();
  const std::vector<Tensor> masks = build_masks();
  if (masks.size() != layers_.size()) {
    throw ContractError("MADE expects " + std::to_string(masks.size()) + " layers, got " +
                        std::to_string(layers_.size()));
  }
  for (std::size_t l = 0; l < masks.size(); ++l) {
    const MadeLayer& layer = layers_[l];
    if (layer.weight.shape() != masks[l].shape() || layer.bias.shape() != Shape{masks[l].shape()[1]}) {
      throw DimensionError("MADE layer " + std::to_string(l) + " has weight " + shape_string(layer.weight.shape()) +
                           ", expected " + shape_string(masks[l].shape()));
    }
    if (layer.mask != masks[l]) {
      throw ContractError("MADE layer " + std::to_string(l) + " mask does not match the configured ordering");
    }
  }
}

std::size_t MadeModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.numel() + layer.bias.numel();
  return n;
}

std::vector<Tensor*> MadeModel::parameters() {
  std::vector<Tensor*> out;
  for (auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<const Tensor*> MadeModel::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<diff::Var> MadeModel::bind(diff::Tape& tape, bool trainable) const {
  std::vector<diff::Var> vars;
  vars.reserve(2 * layers_.size());
  for (const auto& layer : layers_) {
    vars.push_back(trainable ? tape.variable(layer.weight) : tape.constant(layer.weight));
    vars.push_back(trainable ? tape.variable(layer.bias) : tape.constant(layer.bias));
  }
  return vars;
}

diff::Var MadeModel::forward(diff::Tape& tape, const diff::Var& input, std::span<const diff::Var> params) const {
  if (params.size() != 2 * layers_.size()) throw ContractError("MADE forward: parameter count mismatch");
  const std::size_t expected = config_.cond_dim + config_.input_dim;
  if (input.value().rank() != 2 || input.value().cols() != expected) {
    throw DimensionError("MADE input " + shape_string(input.value().shape()) + ", expected [N," +
                         std::to_string(expected) + "]");
  }
  diff::Var h = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const diff::Var mask = tape.constant(layers_[l].mask);
    h = diff::add(diff::masked_matmul(h, params[2 * l], mask), params[2 * l + 1]);
    if (l + 1 < layers_.size()) h = config_.activation == Activation::Relu ? diff::relu(h) : diff::tanh(h);
  }
  return h;
}

diff::Var MadeModel::log_prob(diff::Tape& tape, const diff::Var& cond, const diff::Var& x,
                              std::span<const diff::Var> params) const {
  const diff::Var input = config_.cond_dim > 0 ? diff::concat_cols(cond, x) : x;
  const diff::Var out = forward(tape, input, params);
  return diff::mol_log_prob(out, x, config_.num_components);
}

void MadeModel::check_inputs(const Tensor& cond, const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != config_.input_dim) {
    throw DimensionError("MADE expects x of shape [N," + std::to_string(config_.input_dim) + "], got " +
                         shape_string(x.shape()));
  }
  if (config_.cond_dim > 0 && (cond.rank() != 2 || cond.cols() != config_.cond_dim || cond.rows() != x.rows())) {
    throw DimensionError("MADE expects cond of shape [" + std::to_string(x.rows()) + "," +
                         std::to_string(config_.cond_dim) + "], got " + shape_string(cond.shape()));
  }
}

Tensor MadeModel::output(const Tensor& cond, const Tensor& x) const {
  check_inputs(cond, x);
  diff::Tape tape;
  const auto params = bind(tape, false);
  const diff::Var xv = tape.constant(x);
  const diff::Var input = config_.cond_dim > 0 ? diff::concat_cols(tape.constant(cond), xv) : xv;
  return forward(tape, input, params).value();
}

std::vector<double> MadeModel::log_prob(const Tensor& cond, const Tensor& x) const {
  check_inputs(cond, x);
  diff::Tape tape;
  const auto params = bind(tape, false);
  const diff::Var c = config_.cond_dim > 0 ? tape.constant(cond) : diff::Var();
  const diff::Var lp = log_prob(tape, c, tape.constant(x), params);
  return lp.value().values();
}

double MadeModel::log_prob(std::span<const double> cond, std::span<const double> x) const {
  const Tensor c = Tensor::matrix(1, cond.size(), {cond.begin(), cond.end()});
  const Tensor xs = Tensor::matrix(1, x.size(), {x.begin(), x.end()});
  return log_prob(c, xs).front();
}

std::vector<MoLParams> MadeModel::conditionals(std::span<const double> cond, std::span<const double> x) const {
  const Tensor c = Tensor::matrix(1, cond.size(), {cond.begin(), cond.end()});
  const Tensor xs = Tensor::matrix(1, x.size(), {x.begin(), x.end()});
  const Tensor out = output(c, xs);
  const std::size_t width = 3 * config_.num_components;
  std::vector<MoLParams> result;
  for (std::size_t i = 0; i < config_.input_dim; ++i) result.push_back(mol_params_from_raw(out.row(0).subspan(i * width, width)));
  return result;
}

Tensor MadeModel::grad_log_prob_wrt_input(const Tensor& cond, const Tensor& x) const {
  check_inputs(cond, x);
  diff::Tape tape;
  const auto params = bind(tape, false);
  const diff::Var xv = tape.variable(x);
  const diff::Var c = config_.cond_dim > 0 ? tape.constant(cond) : diff::Var();
  const diff::Var total = diff::sum(log_prob(tape, c, xv, params));
  return tape.backward(total)[xv];
}

Tensor MadeModel::sample(const Tensor& cond, std::size_t n, Rng& rng) const {
  const std::size_t d = config_.input_dim;
  Tensor x(Shape{n, d});
  if (n == 0) return x;
  check_inputs(cond, x);
  const std::vector<std::size_t> order = config_.resolved_ordering();
  const std::size_t width = 3 * config_.num_components;
  for (std::size_t pos = 1; pos <= d; ++pos) {
    const std::size_t i = static_cast<std::size_t>(std::find(order.begin(), order.end(), pos) - order.begin());
    const Tensor out = output(cond, x);
    for (std::size_t r = 0; r < n; ++r) x.at(r, i) = mol_sample_raw(out.row(r).subspan(i * width, width), rng);
  }
  return x;
}

}  // namespace smoothar
