#include "smoothar/mol.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <string>

#include "smoothar/error.hpp"

namespace smoothar {

namespace {

// Terms are summed in sorted order, so the result does not depend on the
// order of the components.
double logsumexp(std::span<const double> v) {
  double small[64];
  std::vector<double> heap;
  double* t = small;
  if (v.size() > 64) {
    heap.resize(v.size());
    t = heap.data();
  }
  std::copy(v.begin(), v.end(), t);
  std::sort(t, t + v.size(), std::greater<>());
  const double m = v.empty() ? -std::numeric_limits<double>::infinity() : t[0];
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += std::exp(t[i] - m);
  return m + std::log(s);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// log f(x; mu, s) for the logistic density with log-scale ls.
double logistic_log_pdf(double x, double mean, double log_scale) {
  const double z = (x - mean) * std::exp(-log_scale);
  return -z - log_scale - 2.0 * softplus(-z);
}

std::size_t components_of(std::span<const double> raw) {
  if (raw.empty() || raw.size() % 3 != 0) {
    throw ContractError("mixture-of-logistics parameters need 3K values, got " + std::to_string(raw.size()));
  }
  return raw.size() / 3;
}

}  // namespace

void MoLParams::validate() const {
  if (logits.empty()) throw ContractError("mixture of logistics needs at least one component");
  if (means.size() != logits.size() || log_scales.size() != logits.size()) {
    throw ContractError("mixture-of-logistics arrays disagree in length");
  }
}

std::vector<double> MoLParams::weights() const {
  validate();
  const double lse = logsumexp(logits);
  std::vector<double> w(logits.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::exp(logits[k] - lse);
  return w;
}

MoLParams mol_params_from_raw(std::span<const double> raw) {
  const std::size_t k = components_of(raw);
  MoLParams p;
  p.logits.assign(raw.begin(), raw.begin() + k);
  p.means.assign(raw.begin() + k, raw.begin() + 2 * k);
  p.log_scales.assign(raw.begin() + 2 * k, raw.end());
  return p;
}

double mol_log_pdf_raw(std::span<const double> raw, double x) {
  if (!std::isfinite(x)) throw DomainError("mixture-of-logistics density at non-finite x");
  const std::size_t k = components_of(raw);
  const auto logits = raw.subspan(0, k);
  const auto means = raw.subspan(k, k);
  const auto log_scales = raw.subspan(2 * k, k);
  const double lse_logits = logsumexp(logits);
  double terms[64];
  std::vector<double> heap;
  double* a = terms;
  if (k > 64) {
    heap.resize(k);
    a = heap.data();
  }
  for (std::size_t c = 0; c < k; ++c) {
    const double ls = std::max(log_scales[c], kMinLogScale);
    a[c] = logits[c] - lse_logits + logistic_log_pdf(x, means[c], ls);
  }
  return logsumexp(std::span<const double>(a, k));
}

double mol_log_pdf_raw_grad(std::span<const double> raw, double x, double scale, std::span<double> grad_raw) {
  const std::size_t k = components_of(raw);
  const auto logits = raw.subspan(0, k);
  const auto means = raw.subspan(k, k);
  const auto log_scales = raw.subspan(2 * k, k);
  const double lse_logits = logsumexp(logits);

  std::vector<double> a(k), z(k), inv_s(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double ls = std::max(log_scales[c], kMinLogScale);
    inv_s[c] = std::exp(-ls);
    z[c] = (x - means[c]) * inv_s[c];
    a[c] = logits[c] - lse_logits + (-z[c] - ls - 2.0 * softplus(-z[c]));
  }
  const double total = logsumexp(a);
  double dx = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double resp = std::exp(a[c] - total);
    const double prior = std::exp(logits[c] - lse_logits);
    // d log f / dz for the logistic density
    const double dz = -std::tanh(0.5 * z[c]);
    grad_raw[c] += scale * (resp - prior);
    grad_raw[k + c] += scale * resp * dz * -inv_s[c];
    if (log_scales[c] >= kMinLogScale) grad_raw[2 * k + c] += scale * resp * (-dz * z[c] - 1.0);
    dx += resp * dz * inv_s[c];
  }
  return scale * dx;
}

double mol_sample_raw(std::span<const double> raw, Rng& rng) {
  const std::size_t k = components_of(raw);
  const auto logits = raw.subspan(0, k);
  const double lse = logsumexp(logits);
  const double u = rng.uniform();
  std::size_t chosen = k - 1;
  double cumulative = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    cumulative += std::exp(logits[c] - lse);
    if (u < cumulative) {
      chosen = c;
      break;
    }
  }
  const double ls = std::max(raw[2 * k + chosen], kMinLogScale);
  return raw[k + chosen] + std::exp(ls) * rng.logistic();
}

namespace {

std::vector<double> to_raw(const MoLParams& p) {
  p.validate();
  std::vector<double> raw;
  raw.reserve(3 * p.components());
  raw.insert(raw.end(), p.logits.begin(), p.logits.end());
  raw.insert(raw.end(), p.means.begin(), p.means.end());
  raw.insert(raw.end(), p.log_scales.begin(), p.log_scales.end());
  return raw;
}

}  // namespace

double mol_log_pdf(const MoLParams& params, double x) { return mol_log_pdf_raw(to_raw(params), x); }

double mol_sample(const MoLParams& params, Rng& rng) { return mol_sample_raw(to_raw(params), rng); }

namespace diff {

Var mol_log_prob(const Var& params, const Var& x, std::size_t components) {
  const Tensor& pv = params.value();
  const Tensor& xv = x.value();
  if (components == 0) throw ContractError("mol_log_prob: zero components");
  if (pv.rank() != 2 || xv.rank() != 2 || pv.rows() != xv.rows() || pv.cols() != xv.cols() * 3 * components) {
    throw DimensionError("mol_log_prob: params " + shape_string(pv.shape()) + " incompatible with x " +
                         shape_string(xv.shape()) + " at K=" + std::to_string(components));
  }
  const std::size_t n = xv.rows();
  const std::size_t d = xv.cols();
  const std::size_t width = 3 * components;
  Tensor out(Shape{n});
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += mol_log_pdf_raw(pv.row(r).subspan(i * width, width), xv.at(r, i));
    out[r] = s;
  }
  auto backward = [components](const Tensor& upstream, std::span<const Tensor* const> inputs,
                               std::span<Tensor> grads, std::span<const bool> wants) {
    const Tensor& p = *inputs[0];
    const Tensor& xs = *inputs[1];
    const std::size_t w = 3 * components;
    std::vector<double> scratch(w);
    for (std::size_t r = 0; r < xs.rows(); ++r) {
      for (std::size_t i = 0; i < xs.cols(); ++i) {
        std::span<double> g_raw = wants[0] ? grads[0].row(r).subspan(i * w, w) : std::span<double>(scratch);
        const double dx = mol_log_pdf_raw_grad(p.row(r).subspan(i * w, w), xs.at(r, i), upstream[r], g_raw);
        if (wants[1]) grads[1].at(r, i) += dx;
      }
    }
  };
  const Var inputs[] = {params, x};
  return params.tape()->custom(inputs, std::move(out), backward);
}

}  // namespace diff

}  // namespace smoothar
