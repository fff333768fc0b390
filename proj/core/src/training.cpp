#include "smoothar/training.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "smoothar/error.hpp"
#include "smoothar/inference.hpp"

namespace smoothar {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config) {
  if (params.size() != grads.size()) throw ContractError("adam: parameter and gradient counts differ");
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  }
  if (state.first_moment.size() != params.size()) throw ContractError("adam: state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = grads[k];
    if (g.shape() != p.shape()) {
      throw DimensionError("adam: gradient " + shape_string(g.shape()) + " vs parameter " + shape_string(p.shape()));
    }
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    for (std::size_t i = 0; i < p.numel(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (elbo_mc_samples == 0) throw ConfigError("ELBO Monte-Carlo sample count must be positive");
  if (trace_every == 0) throw ConfigError("trace interval must be positive");
}

ModelArch default_arch_1d(std::size_t components) { return {{100, 100}, components, Activation::Tanh}; }
ModelArch default_arch_2d(std::size_t components) { return {{256, 256, 256}, components, Activation::Relu}; }
ModelArch default_baseline_arch_2d(std::size_t components) { return {{512, 512, 512}, components, Activation::Relu}; }

MadeModel make_baseline(std::size_t dim, const ModelArch& arch, Rng& rng) {
  MadeConfig cfg;
  cfg.input_dim = dim;
  cfg.hidden_sizes = arch.hidden_sizes;
  cfg.num_components = arch.components;
  cfg.activation = arch.activation;
  return MadeModel(cfg, rng);
}

namespace {

Tensor gather_rows(const Tensor& data, std::size_t count, Rng& rng) {
  const std::size_t d = data.cols();
  Tensor batch(Shape{count, d});
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t src = rng.index(data.rows());
    std::copy_n(data.row(src).begin(), d, batch.row(r).begin());
  }
  return batch;
}

// One optimizer step on -mean log p(x | cond). Returns the loss before the update.
double fit_step(MadeModel& model, AdamState& state, const AdamConfig& adam, const Tensor& cond, const Tensor& x) {
  diff::Tape tape;
  const auto params = model.bind(tape, true);
  const diff::Var c = model.cond_dim() > 0 ? tape.constant(cond) : diff::Var();
  const diff::Var lp = model.log_prob(tape, c, tape.constant(x), params);
  const diff::Var loss = diff::scale(diff::sum(lp), -1.0 / static_cast<double>(x.rows()));
  const double value = loss.value().item();
  if (!std::isfinite(value)) return value;
  const diff::Gradients grads = tape.backward(loss);
  std::vector<Tensor> g;
  g.reserve(params.size());
  for (const auto& p : params) g.push_back(grads[p]);
  const std::vector<Tensor*> targets = model.parameters();
  adam_step(targets, g, state, adam);
  return value;
}

[[noreturn]] void diverged(const char* what, std::size_t step, std::uint64_t batch_seed, double loss) {
  std::ostringstream os;
  os << what << " loss became " << loss << " at step " << step << " (batch seed " << batch_seed << ")";
  throw TrainingError(os.str());
}

class TraceWindow {
 public:
  explicit TraceWindow(std::size_t every) : every_(every) {}
  void add(std::size_t step, double loss, LossTrace& trace) {
    sum_ += loss;
    ++count_;
    if ((step + 1) % every_ == 0) flush(step + 1, trace);
  }
  void finish(std::size_t steps, LossTrace& trace) {
    if (count_ > 0) flush(steps, trace);
  }

 private:
  void flush(std::size_t step, LossTrace& trace) {
    trace.push_back({step, sum_ / static_cast<double>(count_)});
    sum_ = 0.0;
    count_ = 0;
  }
  std::size_t every_;
  double sum_ = 0.0;
  std::size_t count_ = 0;
};

void check_data(const Tensor& data, std::size_t dim) {
  if (data.rank() != 2 || data.cols() != dim) {
    throw DimensionError("training data " + shape_string(data.shape()) + " does not match model dimension " +
                         std::to_string(dim));
  }
  if (data.rows() == 0) throw ContractError("training data is empty");
}

}  // namespace

LossTrace train_baseline(MadeModel& model, const Tensor& data, const TrainConfig& config) {
  config.validate();
  if (model.cond_dim() != 0) throw ContractError("baseline model must be unconditional");
  LossTrace trace;
  if (config.steps == 0) return trace;
  check_data(data, model.input_dim());
  AdamState state;
  TraceWindow window(config.trace_every);
  const Tensor no_cond;
  for (std::size_t step = 0; step < config.steps; ++step) {
    const std::uint64_t batch_seed = Rng::derive(config.seed, step);
    Rng rng(batch_seed);
    const Tensor batch = gather_rows(data, config.batch_size, rng);
    const double loss = fit_step(model, state, config.adam(), no_cond, batch);
    if (!std::isfinite(loss)) diverged("baseline", step, batch_seed, loss);
    window.add(step, loss, trace);
  }
  window.finish(config.steps, trace);
  return trace;
}

void TwoStageModel::validate() const {
  const std::size_t d = kernel.dim();
  if (prior.input_dim() != d || prior.cond_dim() != 0 || denoiser.input_dim() != d || denoiser.cond_dim() != d) {
    throw ContractError("two-stage model dimensions disagree: prior D=" + std::to_string(prior.input_dim()) +
                        " C=" + std::to_string(prior.cond_dim()) + ", denoiser D=" +
                        std::to_string(denoiser.input_dim()) + " C=" + std::to_string(denoiser.cond_dim()) +
                        ", kernel D=" + std::to_string(d));
  }
}

TwoStageModel make_two_stage(std::size_t dim, const ModelArch& arch, const SmoothingKernel& kernel, Rng& rng) {
  if (kernel.dim() != dim) throw DimensionError("kernel dimension does not match model dimension");
  MadeConfig prior_cfg;
  prior_cfg.input_dim = dim;
  prior_cfg.hidden_sizes = arch.hidden_sizes;
  prior_cfg.num_components = arch.components;
  prior_cfg.activation = arch.activation;
  MadeConfig denoiser_cfg = prior_cfg;
  denoiser_cfg.cond_dim = dim;
  TwoStageModel ts{MadeModel(prior_cfg, rng), MadeModel(denoiser_cfg, rng), kernel};
  ts.validate();
  return ts;
}

TwoStageTraces train_two_stage(TwoStageModel& model, const Tensor& data, const TrainConfig& config) {
  config.validate();
  model.validate();
  TwoStageTraces traces;
  if (config.steps == 0) return traces;
  check_data(data, model.dim());
  AdamState prior_state;
  AdamState denoiser_state;
  TraceWindow prior_window(config.trace_every);
  TraceWindow denoiser_window(config.trace_every);
  const Tensor no_cond;
  for (std::size_t step = 0; step < config.steps; ++step) {
    const std::uint64_t batch_seed = Rng::derive(config.seed, step);
    Rng rng(batch_seed);
    const Tensor batch = gather_rows(data, config.batch_size, rng);
    const Tensor smoothed = model.kernel.sample(batch, rng);
    const double prior_loss = fit_step(model.prior, prior_state, config.adam(), no_cond, smoothed);
    if (!std::isfinite(prior_loss)) diverged("prior", step, batch_seed, prior_loss);
    const double denoiser_loss = fit_step(model.denoiser, denoiser_state, config.adam(), smoothed, batch);
    if (!std::isfinite(denoiser_loss)) diverged("denoiser", step, batch_seed, denoiser_loss);
    prior_window.add(step, prior_loss, traces.prior);
    denoiser_window.add(step, denoiser_loss, traces.denoiser);
  }
  prior_window.finish(config.steps, traces.prior);
  denoiser_window.finish(config.steps, traces.denoiser);
  return traces;
}

TwoStageBatchLoss two_stage_batch_objective(const TwoStageModel& model, const Tensor& x, const Tensor& smoothed) {
  model.validate();
  if (x.shape() != smoothed.shape() || x.rows() == 0) throw DimensionError("x and x̃ batches must share a non-empty shape");
  const std::vector<double> lp_prior = model.prior.log_prob(Tensor(), smoothed);
  const std::vector<double> lp_denoiser = model.denoiser.log_prob(smoothed, x);
  const double n = static_cast<double>(x.rows());
  TwoStageBatchLoss out;
  out.prior_loss = -std::accumulate(lp_prior.begin(), lp_prior.end(), 0.0) / n;
  out.denoiser_loss = -std::accumulate(lp_denoiser.begin(), lp_denoiser.end(), 0.0) / n;
  double j = 0.0;
  for (std::size_t i = 0; i < lp_prior.size(); ++i) j += lp_prior[i] + lp_denoiser[i];
  out.objective = j / n;
  return out;
}

GridSearchResult grid_search_sigma(KernelFamily family, std::span<const double> sigmas, const Tensor& train,
                                   const Tensor& heldout, const ModelArch& arch, const TrainConfig& config,
                                   std::size_t eval_mc) {
  if (sigmas.empty()) throw ContractError("grid search needs at least one sigma");
  if (heldout.rows() == 0) throw ContractError("grid search needs held-out data");
  GridSearchResult result;
  result.family = family;
  for (const double sigma : sigmas) {
    Rng init_rng(Rng::derive(config.seed, 0x1417));
    TwoStageModel model = make_two_stage(train.cols(), arch, SmoothingKernel(family, sigma, train.cols()), init_rng);
    train_two_stage(model, train, config);
    Rng eval_rng(Rng::derive(config.seed, 0xe7a1));
    const std::vector<double> values = elbo(model, heldout, eval_mc, eval_rng);
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    result.rows.push_back({sigma, mean});
    if (result.rows.size() == 1 || mean > result.best_elbo) {
      result.best_elbo = mean;
      result.best_sigma = sigma;
    }
  }
  return result;
}

}  // namespace smoothar
