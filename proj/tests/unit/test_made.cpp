#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "smoothar/error.hpp"
#include "smoothar/made.hpp"

using namespace smoothar;

namespace {

MadeConfig config(std::size_t d, std::size_t c, std::vector<std::size_t> hidden, std::size_t k,
                  Activation act = Activation::Tanh, std::vector<std::size_t> ordering = {}) {
  MadeConfig cfg;
  cfg.input_dim = d;
  cfg.cond_dim = c;
  cfg.hidden_sizes = std::move(hidden);
  cfg.num_components = k;
  cfg.activation = act;
  cfg.ordering = std::move(ordering);
  return cfg;
}

// Random biases too, so nothing is trivially zero.
MadeModel randomized(const MadeConfig& cfg, Rng& rng) {
  MadeModel m(cfg, rng);
  for (Tensor* p : m.parameters())
    for (std::size_t i = 0; i < p->numel(); ++i) (*p)[i] += rng.uniform(-0.3, 0.3);
  return m;
}

std::vector<std::size_t> random_ordering(std::size_t d, Rng& rng) {
  std::vector<std::size_t> o(d);
  for (std::size_t i = 0; i < d; ++i) o[i] = i + 1;
  std::shuffle(o.begin(), o.end(), rng.engine());
  return o;
}

}  // namespace

TEST_CASE("config validation") {
  Rng rng(1);
  CHECK_THROWS_AS(MadeModel(config(0, 0, {4}, 1), rng), ConfigError);
  CHECK_THROWS_AS(MadeModel(config(2, 0, {4}, 0), rng), ConfigError);
  CHECK_THROWS_AS(MadeModel(config(2, 0, {0}, 1), rng), ConfigError);
  CHECK_THROWS_AS(MadeModel(config(3, 0, {4}, 1, Activation::Relu, {1, 1, 2}), rng), ConfigError);
  CHECK_THROWS_AS(activation_from_string("gelu"), ConfigError);
  CHECK(config(3, 0, {4}, 2).output_width() == 18);
}

TEST_CASE("parameter count") {
  Rng rng(2);
  const MadeModel m(config(2, 2, {8, 6}, 3), rng);
  // (4*8 + 8) + (8*6 + 6) + (6*18 + 18)
  CHECK(m.parameter_count() == 40 + 54 + 126);
}

TEST_CASE("masks follow the degree rule") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.index(4), c = rng.index(3);
    const MadeModel m(config(d, c, {3 + rng.index(6), 3 + rng.index(6)}, 2, Activation::Relu, random_ordering(d, rng)), rng);
    std::vector<std::size_t> prev = m.input_degrees();
    for (std::size_t l = 0; l < m.layers().size(); ++l) {
      const Tensor& mask = m.layers()[l].mask;
      const bool output = l + 1 == m.layers().size();
      for (std::size_t i = 0; i < mask.rows(); ++i) {
        for (std::size_t o = 0; o < mask.cols(); ++o) {
          const std::size_t out_deg = output ? m.config().resolved_ordering()[o / 6] : m.hidden_degrees()[l][o];
          const bool allowed = output ? out_deg > prev[i] : out_deg >= prev[i];
          CHECK(mask.at(i, o) == (allowed ? 1.0 : 0.0));
        }
      }
      if (!output) prev = m.hidden_degrees()[l];
    }
    for (std::size_t j = 0; j < c; ++j) CHECK(m.input_degrees()[j] == 0);
  }
}

TEST_CASE("autoregressive property holds bit-exactly") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 1 + rng.index(4), c = rng.index(3), k = 1 + rng.index(2);
    const auto order = random_ordering(d, rng);
    const MadeModel m = randomized(config(d, c, {8, 8}, k, rng.uniform() < 0.5 ? Activation::Relu : Activation::Tanh, order), rng);
    const Tensor cond = oracle::random_tensor({1, c}, rng);
    const Tensor x = oracle::random_tensor({1, d}, rng);
    const Tensor base = m.output(cond, x);
    const std::size_t w = 3 * k;
    for (std::size_t j = 0; j < d; ++j) {
      Tensor moved = x;
      moved[j] += 0.7;
      const Tensor out = m.output(cond, moved);
      for (std::size_t i = 0; i < d; ++i) {
        if (order[j] < order[i]) continue;
        for (std::size_t e = 0; e < w; ++e) CHECK(out[i * w + e] == base[i * w + e]);
      }
    }
  }
}

TEST_CASE("D=1 unconditional output ignores its input") {
  Rng rng(5);
  const MadeModel m = randomized(config(1, 0, {5}, 2), rng);
  CHECK(m.output(Tensor(), Tensor::matrix({{-3.0}})) == m.output(Tensor(), Tensor::matrix({{4.0}})));
}

TEST_CASE("conditioning inputs reach the first dimension") {
  Rng rng(6);
  for (const std::size_t d : {1u, 2u, 3u}) {
    const MadeModel m = randomized(config(d, 2, {16, 16}, 2), rng);
    const Tensor x = oracle::random_tensor({1, d}, rng);
    const Tensor cond = Tensor::matrix({{0.1, -0.2}});
    const Tensor base = m.output(cond, x);
    for (std::size_t j = 0; j < 2; ++j) {
      Tensor moved = cond;
      moved[j] += 0.5;
      const Tensor out = m.output(moved, x);
      bool changed = false;
      for (std::size_t e = 0; e < 6; ++e) changed = changed || out[e] != base[e];
      CHECK(changed);
    }
  }
}

TEST_CASE("zero weights reduce the model to its bias mixture") {
  Rng rng(7);
  MadeModel m(config(1, 0, {4}, 2), rng);
  for (auto& p : m.parameters())
    for (std::size_t i = 0; i < p->numel(); ++i) (*p)[i] = 0.0;
  Tensor& out_bias = *m.parameters().back();
  const std::vector<double> raw = {0.2, -0.1, -0.5, 0.5, std::log(0.3), std::log(0.2)};
  for (std::size_t i = 0; i < 6; ++i) out_bias[i] = raw[i];
  for (double x : {-1.0, 0.0, 0.7}) CHECK(m.log_prob(std::span<const double>{}, std::span<const double>(&x, 1)) == mol_log_pdf_raw(raw, x));
}

TEST_CASE("joint log-prob is the sum of its conditionals") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t c = rng.index(3);
    const auto order = random_ordering(2, rng);
    const MadeModel m = randomized(config(2, c, {10, 10}, 2, Activation::Relu, order), rng);
    const Tensor cond = oracle::random_tensor({1, c}, rng);
    const Tensor x = oracle::random_tensor({1, 2}, rng);
    // first pass sees only the leading coordinate, second pass the full point
    const std::size_t first = order[0] == 1 ? 0 : 1;
    const std::size_t second = 1 - first;
    Tensor partial(Shape{1, 2});
    partial[first] = x[first];
    const Tensor out1 = m.output(cond, partial);
    const Tensor out2 = m.output(cond, x);
    const double lp = mol_log_pdf_raw(out1.row(0).subspan(first * 6, 6), x[first]) +
                      mol_log_pdf_raw(out2.row(0).subspan(second * 6, 6), x[second]);
    CHECK(std::abs(m.log_prob(cond.row(0), x.row(0)) - lp) < 1e-12);
  }
}

TEST_CASE("batched log-prob equals the per-row loop") {
  Rng rng(9);
  const MadeModel m = randomized(config(3, 2, {12, 12}, 3), rng);
  const Tensor cond = oracle::random_tensor({17, 2}, rng);
  const Tensor x = oracle::random_tensor({17, 3}, rng);
  const auto batch = m.log_prob(cond, x);
  for (std::size_t r = 0; r < 17; ++r) CHECK(std::abs(batch[r] - m.log_prob(cond.row(r), x.row(r))) < 1e-10);
}

TEST_CASE("input gradient matches finite differences") {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.index(3), c = rng.index(3);
    const MadeModel m = randomized(config(d, c, {10, 10}, 2, Activation::Tanh, random_ordering(d, rng)), rng);
    const Tensor cond = oracle::random_tensor({1, c}, rng);
    const Tensor x = oracle::random_tensor({1, d}, rng);
    const Tensor g = m.grad_log_prob_wrt_input(cond, x);
    const auto numeric = oracle::numeric_gradient(
        [&](const std::vector<double>& v) { return m.log_prob(cond.row(0), std::span<const double>(v)); }, x.values());
    CHECK(oracle::max_rel_err(g.values(), numeric) < 1e-5);
  }
}

TEST_CASE("single logistic: gradient zero at the mode and -1/s in the tail") {
  Rng rng(11);
  MadeModel m(config(1, 0, {3}, 1), rng);
  for (auto& p : m.parameters())
    for (std::size_t i = 0; i < p->numel(); ++i) (*p)[i] = 0.0;
  (*m.parameters().back())[2] = std::log(0.5);
  CHECK(m.grad_log_prob_wrt_input(Tensor(), Tensor::matrix({{0.0}}))[0] == doctest::Approx(0.0));
  CHECK(m.grad_log_prob_wrt_input(Tensor(), Tensor::matrix({{40.0}}))[0] == doctest::Approx(-2.0).epsilon(1e-9));
}

TEST_CASE("sampling") {
  Rng rng(12);
  SUBCASE("degenerate conditional") {
    MadeModel m(config(1, 0, {3}, 1), rng);
    for (auto& p : m.parameters())
      for (std::size_t i = 0; i < p->numel(); ++i) (*p)[i] = 0.0;
    Tensor& b = *m.parameters().back();
    b[1] = 2.0;
    b[2] = -30.0;
    const Tensor s = m.sample(Tensor(), 500, rng);
    for (double v : s.values()) CHECK(std::abs(v - 2.0) < 0.01);
  }
  SUBCASE("deterministic and finite under its own log-prob") {
    const MadeModel m = randomized(config(3, 2, {8}, 2), rng);
    const Tensor cond = oracle::random_tensor({50, 2}, rng);
    Rng a(77), b(77);
    const Tensor s1 = m.sample(cond, 50, a);
    CHECK(s1 == m.sample(cond, 50, b));
    for (double lp : m.log_prob(cond, s1)) CHECK(std::isfinite(lp));
  }
  SUBCASE("n = 0 is empty") { CHECK(MadeModel(config(2, 0, {4}, 1), rng).sample(Tensor(), 0, rng).numel() == 0); }
}

TEST_CASE("2-d model density integrates to one") {
  Rng rng(13);
  const MadeModel m = randomized(config(2, 0, {8}, 2), rng);
  const std::size_t n = 600;
  const double lo = -12.0, hi = 12.0, h = (hi - lo) / n;
  Tensor grid(Shape{n * n, 2});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      grid.at(i * n + j, 0) = lo + (i + 0.5) * h;
      grid.at(i * n + j, 1) = lo + (j + 0.5) * h;
    }
  double mass = 0.0;
  for (double lp : m.log_prob(Tensor(), grid)) mass += std::exp(lp) * h * h;
  CHECK(std::abs(mass - 1.0) < 1e-2);
}

TEST_CASE("restoring from layers checks shapes and masks") {
  Rng rng(14);
  const MadeModel m(config(2, 1, {5}, 2), rng);
  CHECK_NOTHROW(MadeModel(m.config(), m.layers()));
  auto bad = m.layers();
  bad[0].mask[0] = 1.0 - bad[0].mask[0];
  CHECK_THROWS_AS(MadeModel(m.config(), bad), ContractError);
  auto short_layers = m.layers();
  short_layers.pop_back();
  CHECK_THROWS_AS(MadeModel(m.config(), short_layers), ContractError);
  CHECK_THROWS_AS(m.log_prob(Tensor::matrix({{1.0, 2.0}}), Tensor::matrix({{1.0, 2.0}})), DimensionError);
}
