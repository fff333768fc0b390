#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "smoothar/analysis.hpp"
#include "smoothar/datasets.hpp"
#include "smoothar/error.hpp"
#include "smoothar/inference.hpp"
#include "smoothar/io.hpp"
#include "smoothar/smoothing.hpp"
#include "smoothar/training.hpp"

namespace smoothar::cli {

namespace {

using nlohmann::json;

struct Common {
  std::uint64_t seed = 0;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool out_required = true) {
  app->add_option("--seed", c.seed, "random seed")->capture_default_str();
  auto* o = app->add_option("--out", c.out, "output path");
  if (out_required) o->required();
}

// Subcommand path plus every option given on the command line except --out,
// ordered by option name.
std::string canonical_config(const CLI::App* leaf) {
  std::vector<std::string> path;
  for (const CLI::App* a = leaf; a != nullptr && a->get_parent() != nullptr; a = a->get_parent()) path.push_back(a->get_name());
  std::string s;
  for (auto it = path.rbegin(); it != path.rend(); ++it) s += *it + " ";
  std::map<std::string, std::string> opts;
  for (const CLI::Option* opt : leaf->get_options()) {
    if (opt->count() == 0 || opt->get_name() == "--out" || opt->get_name() == "--help") continue;
    std::string v;
    for (const auto& r : opt->results()) v += r + ";";
    opts[opt->get_name()] = v;
  }
  for (const auto& [k, v] : opts) s += k + "=" + v + " ";
  return s;
}

ArtifactMeta make_meta(const CLI::App* leaf, std::uint64_t seed) {
  ArtifactMeta m;
  m.seed = seed;
  m.config_hash = config_hash(canonical_config(leaf));
  return m;
}

std::string stem_of(const std::string& path) {
  for (const char* ext : {".json", ".csv", ".svg"}) {
    const std::string e = ext;
    if (path.size() > e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0) return path.substr(0, path.size() - e.size());
  }
  return path;
}

void require_dim(std::size_t model_dim, std::size_t data_dim, const std::string& what) {
  if (model_dim != data_dim) {
    throw DimensionError("checkpoint dimension " + std::to_string(model_dim) + " does not match " + what + " dimension " +
                         std::to_string(data_dim));
  }
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

Tensor loss_table(const LossTrace& trace) {
  Tensor t(Shape{trace.size(), 2});
  for (std::size_t i = 0; i < trace.size(); ++i) {
    t.at(i, 0) = static_cast<double>(trace[i].step);
    t.at(i, 1) = trace[i].loss;
  }
  return t;
}

std::vector<GaussianMode> modes_from_params(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("--params: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("--params: expected a JSON object");
  if (doc.contains("preset")) {
    const json& p = doc["preset"];
    if (p == "ten_mode") return ten_mode_preset();
    if (p == "six_mode") return six_mode_preset();
    if (p == "two_mode") return two_mode_preset();
    throw ParseError("--params: field preset: unknown preset " + p.dump());
  }
  if (!doc.contains("modes") || !doc["modes"].is_array()) throw ParseError("--params: field modes: expected an array");
  std::vector<GaussianMode> modes;
  for (std::size_t i = 0; i < doc["modes"].size(); ++i) {
    const json& m = doc["modes"][i];
    const std::string where = "--params: field modes[" + std::to_string(i) + "]";
    if (!m.is_object() || !m.contains("mean") || !m["mean"].is_number()) throw ParseError(where + ".mean: expected a number");
    GaussianMode g;
    g.mean = m["mean"].get<double>();
    if (m.contains("std")) {
      if (!m["std"].is_number()) throw ParseError(where + ".std: expected a number");
      g.stddev = m["std"].get<double>();
    }
    if (m.contains("weight")) {
      if (!m["weight"].is_number()) throw ParseError(where + ".weight: expected a number");
      g.weight = m["weight"].get<double>();
    }
    modes.push_back(g);
  }
  return modes;
}

struct ModelOptions {
  std::string data;
  std::size_t mixtures = 0;
  std::vector<std::size_t> hidden;
  std::string activation;
  std::size_t steps = 0;
  double lr = 2e-4;
  std::size_t batch = 128;
  std::size_t trace_every = 100;
  std::size_t mc = 128;
};

void add_model_options(CLI::App* app, ModelOptions& o) {
  app->add_option("--data", o.data, "training data CSV")->required();
  app->add_option("--mixtures", o.mixtures, "logistic components per conditional")->required()->check(CLI::PositiveNumber);
  app->add_option("--hidden", o.hidden, "hidden layer sizes, comma separated")->delimiter(',');
  app->add_option("--activation", o.activation, "relu or tanh");
  app->add_option("--steps", o.steps, "optimizer steps (default 20000 for 1-d data, 60000 for 2-d)");
  app->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--batch", o.batch, "minibatch size")->capture_default_str();
  app->add_option("--trace-every", o.trace_every, "loss trace interval")->capture_default_str();
}

ModelArch resolve_arch(const ModelOptions& o, std::size_t dim, bool baseline) {
  ModelArch arch = dim == 1 ? default_arch_1d(o.mixtures) : (baseline ? default_baseline_arch_2d(o.mixtures) : default_arch_2d(o.mixtures));
  if (!o.hidden.empty()) arch.hidden_sizes = o.hidden;
  if (!o.activation.empty()) arch.activation = activation_from_string(o.activation);
  return arch;
}

TrainConfig resolve_train(const ModelOptions& o, std::size_t dim, std::uint64_t seed) {
  TrainConfig c;
  c.learning_rate = o.lr;
  c.batch_size = o.batch;
  c.steps = o.steps > 0 ? o.steps : (dim == 1 ? 20000 : 60000);
  c.seed = seed;
  c.trace_every = o.trace_every;
  return c;
}

void record_config(TrainingLog& log, const ModelArch& arch, const TrainConfig& c, const Split& split) {
  log.numbers["steps"] = static_cast<double>(c.steps);
  log.numbers["learning_rate"] = c.learning_rate;
  log.numbers["batch_size"] = static_cast<double>(c.batch_size);
  log.numbers["train_points"] = static_cast<double>(split.train.rows());
  log.numbers["heldout_points"] = static_cast<double>(split.heldout.rows());
  log.strings["hidden_sizes"] = join_sizes(arch.hidden_sizes);
  log.strings["activation"] = to_string(arch.activation);
}

Tensor load_points(const std::string& path) {
  CsvTable t = read_csv_file(path);
  if (t.data.cols() == 0) throw ContractError(path + ": no columns");
  return std::move(t.data);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Randomized-smoothing autoregressive density estimation", "smoothar"};
  app.require_subcommand(1);
  app.set_version_flag("--version", artifact_version());

  // dataset gen
  auto* dataset = app.add_subcommand("dataset", "synthetic data")->require_subcommand(1);
  auto* gen = dataset->add_subcommand("gen", "sample a synthetic dataset to CSV");
  Common gen_c;
  std::string gen_name, gen_params;
  std::size_t gen_n = 0;
  add_common(gen, gen_c);
  gen->add_option("--name", gen_name, "dataset name")->required()->check(CLI::IsMember(dataset_names()));
  gen->add_option("--n", gen_n, "number of points")->required();
  gen->add_option("--params", gen_params, "JSON parameters (multimode_1d: {\"preset\": ...} or {\"modes\": [...]})");

  // train
  auto* train = app.add_subcommand("train", "fit a model")->require_subcommand(1);
  auto* train_base = train->add_subcommand("baseline", "maximum-likelihood MADE on raw data");
  Common tb_c;
  ModelOptions tb_o;
  add_common(train_base, tb_c);
  add_model_options(train_base, tb_o);

  auto* train_ts = train->add_subcommand("two-stage", "smoothed prior plus conditional denoiser");
  Common ts_c;
  ModelOptions ts_o;
  std::string ts_family;
  double ts_sigma = 0.0;
  bool ts_heuristic = false;
  add_common(train_ts, ts_c);
  add_model_options(train_ts, ts_o);
  train_ts->add_option("--family", ts_family, "gaussian, laplace or uniform")->required();
  auto* sigma_opt = train_ts->add_option("--sigma", ts_sigma, "kernel scale");
  auto* heur_opt = train_ts->add_flag("--sigma-heuristic", ts_heuristic, "median pairwise distance / (2 sqrt(D))");
  sigma_opt->excludes(heur_opt);
  train_ts->add_option("--mc", ts_o.mc, "Monte-Carlo draws for the held-out ELBO")->capture_default_str();

  // sample
  auto* sample = app.add_subcommand("sample", "draw samples from a checkpoint");
  Common sm_c;
  std::string sm_ckpt;
  std::size_t sm_n = 0;
  bool sm_intermediate = false;
  add_common(sample, sm_c);
  sample->add_option("--ckpt", sm_ckpt, "checkpoint JSON")->required();
  sample->add_option("--n", sm_n, "number of samples")->required();
  sample->add_flag("--emit-intermediate", sm_intermediate, "also write the smoothed samples x̃");

  // denoise
  auto* denoise = app.add_subcommand("denoise", "map smoothed points back to data space");
  Common dn_c;
  std::string dn_ckpt, dn_input, dn_method;
  double dn_sigma = -1.0;
  add_common(denoise, dn_c);
  denoise->add_option("--ckpt", dn_ckpt, "checkpoint JSON")->required();
  denoise->add_option("--input", dn_input, "CSV of smoothed points")->required();
  denoise->add_option("--method", dn_method, "single-step or model")->required()->check(CLI::IsMember({"single-step", "model"}));
  denoise->add_option("--sigma", dn_sigma, "step scale for a baseline checkpoint (single-step only)");

  // eval
  auto* eval = app.add_subcommand("eval", "negative log-likelihood or negative ELBO");
  Common ev_c;
  std::string ev_ckpt, ev_data, ev_mode, ev_task;
  std::size_t ev_mc = 128;
  add_common(eval, ev_c, false);
  eval->add_option("--ckpt", ev_ckpt, "checkpoint JSON")->required();
  eval->add_option("--data", ev_data, "test CSV")->required();
  eval->add_option("--mode", ev_mode, "exact or elbo")->required();
  eval->add_option("--mc", ev_mc, "Monte-Carlo draws per point")->capture_default_str();
  eval->add_option("--task", ev_task, "task label for the result record");

  // gridsearch
  auto* grid = app.add_subcommand("gridsearch", "held-out ELBO over a sigma grid");
  Common gs_c;
  ModelOptions gs_o;
  std::string gs_family;
  std::vector<double> gs_sigmas;
  add_common(grid, gs_c);
  add_model_options(grid, gs_o);
  grid->add_option("--family", gs_family, "gaussian, laplace or uniform")->required();
  grid->add_option("--sigmas", gs_sigmas, "comma separated kernel scales")->required()->delimiter(',');
  grid->add_option("--mc", gs_o.mc, "Monte-Carlo draws for the held-out ELBO")->capture_default_str();

  // analyze
  auto* analyze = app.add_subcommand("analyze", "numerical checks of the smoothing theory")->require_subcommand(1);
  auto* thm1 = analyze->add_subcommand("theorem1", "Lipschitz constant before and after smoothing");
  Common t1_c;
  std::string t1_dataset = "multimode_1d", t1_params, t1_family = "gaussian";
  std::vector<double> t1_sigmas{0.1, 0.5, 1.0};
  LipschitzGrid t1_grid;
  add_common(thm1, t1_c);
  thm1->add_option("--dataset", t1_dataset, "1-d dataset")->capture_default_str()->check(CLI::IsMember({"two_mode_1d", "multimode_1d"}));
  thm1->add_option("--params", t1_params, "JSON parameters for multimode_1d");
  thm1->add_option("--family", t1_family, "kernel family")->capture_default_str();
  thm1->add_option("--sigmas", t1_sigmas, "kernel scales")->delimiter(',');
  thm1->add_option("--lo", t1_grid.lo, "grid start")->capture_default_str();
  thm1->add_option("--hi", t1_grid.hi, "grid end")->capture_default_str();
  thm1->add_option("--grid", t1_grid.points, "grid points")->capture_default_str();

  auto* prop1 = analyze->add_subcommand("prop1", "expected smoothed log-density against its second-order expansion");
  Common p1_c;
  std::string p1_density = "normal", p1_family = "gaussian";
  double p1_sigma = 0.5;
  std::vector<double> p1_x{0.0};
  std::size_t p1_mc = 1000000;
  add_common(prop1, p1_c);
  prop1->add_option("--density", p1_density, "normal or quartic")->capture_default_str()->check(CLI::IsMember({"normal", "quartic"}));
  prop1->add_option("--family", p1_family, "kernel family")->capture_default_str();
  prop1->add_option("--sigma", p1_sigma, "kernel scale")->capture_default_str();
  prop1->add_option("--x", p1_x, "evaluation point, comma separated")->delimiter(',');
  prop1->add_option("--mc", p1_mc, "Monte-Carlo draws")->capture_default_str();

  auto* ringd = analyze->add_subcommand("ring-derivatives", "density gradient along the diagonal through a ring");
  Common rd_c;
  std::string rd_geometry = "ring";
  std::vector<double> rd_offsets{-0.5, -0.1, -0.02, -0.01, 0.0, 0.01, 0.02, 0.1, 0.5};
  add_common(ringd, rd_c);
  ringd->add_option("--geometry", rd_geometry, "ring, rings or olympics")->capture_default_str()->check(CLI::IsMember({"ring", "rings", "olympics"}));
  ringd->add_option("--offsets", rd_offsets, "diagonal offsets c")->delimiter(',');

  auto* ablation = analyze->add_subcommand("ablation", "single-step update applied to an unsmoothed baseline");
  Common ab_c;
  std::string ab_ckpt;
  std::vector<double> ab_sigmas{0.0, 0.01, 0.05, 0.1};
  std::size_t ab_n = 10000;
  double ab_valley = 0.15;
  add_common(ablation, ab_c);
  ablation->add_option("--ckpt", ab_ckpt, "baseline checkpoint")->required();
  ablation->add_option("--sigmas", ab_sigmas, "step scales")->delimiter(',');
  ablation->add_option("--n", ab_n, "samples")->capture_default_str();
  ablation->add_option("--valley", ab_valley, "valley half-width for 1-d models")->capture_default_str();

  // plot
  auto* plot = app.add_subcommand("plot", "figures")->require_subcommand(1);
  auto* scatter = plot->add_subcommand("scatter", "SVG scatter of a CSV");
  Common sc_c;
  std::string sc_input;
  add_common(scatter, sc_c);
  scatter->add_option("--input", sc_input, "CSV of points")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      DatasetSpec spec{gen_name, gen_n, gen_c.seed, {}};
      if (!gen_params.empty()) {
        if (gen_name != "multimode_1d") throw ConfigError("--params applies to multimode_1d only");
        spec.modes = modes_from_params(gen_params);
      }
      const Dataset ds = generate(spec);
      const ArtifactMeta meta = make_meta(gen, gen_c.seed);
      write_csv_file(gen_c.out, coordinate_header(ds.points.cols()), ds.points, &meta);
      return 0;
    }

    if (train_base->parsed()) {
      const Tensor data = load_points(tb_o.data);
      const std::size_t dim = data.cols();
      const Split split = split_holdout(data, tb_c.seed);
      const ModelArch arch = resolve_arch(tb_o, dim, true);
      const TrainConfig cfg = resolve_train(tb_o, dim, tb_c.seed);
      Rng init(Rng::derive(tb_c.seed, 1));
      MadeModel model = make_baseline(dim, arch, init);
      const LossTrace trace = train_baseline(model, split.train, cfg);
      const ArtifactMeta meta = make_meta(train_base, tb_c.seed);
      Checkpoint ck{model, meta, {}};
      record_config(ck.training_log, arch, cfg, split);
      if (split.heldout.rows() > 0) ck.training_log.numbers["final_heldout_nll"] = eval_nll(model, split.heldout).nll;
      const std::string stem = stem_of(tb_c.out);
      ck.training_log.strings["heldout_csv"] = stem + ".heldout.csv";
      save_checkpoint(tb_c.out, ck);
      write_csv_file(stem + ".loss.csv", {"step", "loss"}, loss_table(trace), &meta);
      write_csv_file(stem + ".heldout.csv", coordinate_header(dim), split.heldout, &meta);
      if (ck.training_log.numbers.count("final_heldout_nll")) out << "heldout_nll " << fmt(ck.training_log.numbers["final_heldout_nll"]) << "\n";
      return 0;
    }

    if (train_ts->parsed()) {
      if (!ts_heuristic && sigma_opt->count() == 0) throw ConfigError("give --sigma or --sigma-heuristic");
      const Tensor data = load_points(ts_o.data);
      const std::size_t dim = data.cols();
      const Split split = split_holdout(data, ts_c.seed);
      const double sigma = ts_heuristic ? sigma_heuristic(split.train, ts_c.seed) : ts_sigma;
      const SmoothingKernel kernel(kernel_family_from_string(ts_family), sigma, dim);
      const ModelArch arch = resolve_arch(ts_o, dim, false);
      const TrainConfig cfg = resolve_train(ts_o, dim, ts_c.seed);
      Rng init(Rng::derive(ts_c.seed, 1));
      TwoStageModel model = make_two_stage(dim, arch, kernel, init);
      const TwoStageTraces traces = train_two_stage(model, split.train, cfg);
      const ArtifactMeta meta = make_meta(train_ts, ts_c.seed);
      Checkpoint ck{model, meta, {}};
      record_config(ck.training_log, arch, cfg, split);
      ck.training_log.numbers["sigma"] = sigma;
      ck.training_log.strings["family"] = ts_family;
      if (split.heldout.rows() > 0) {
        Rng eval_rng(Rng::derive(ts_c.seed, 2));
        ck.training_log.numbers["final_heldout_neg_elbo"] = eval_nll(model, split.heldout, EvalMode::Elbo, ts_o.mc, eval_rng).nll;
        ck.training_log.numbers["heldout_mc_samples"] = static_cast<double>(ts_o.mc);
      }
      const std::string stem = stem_of(ts_c.out);
      ck.training_log.strings["heldout_csv"] = stem + ".heldout.csv";
      save_checkpoint(ts_c.out, ck);
      write_csv_file(stem + ".prior_loss.csv", {"step", "loss"}, loss_table(traces.prior), &meta);
      write_csv_file(stem + ".denoiser_loss.csv", {"step", "loss"}, loss_table(traces.denoiser), &meta);
      write_csv_file(stem + ".heldout.csv", coordinate_header(dim), split.heldout, &meta);
      out << "sigma " << fmt(sigma) << "\n";
      if (ck.training_log.numbers.count("final_heldout_neg_elbo")) {
        out << "heldout_neg_elbo " << fmt(ck.training_log.numbers["final_heldout_neg_elbo"]) << " (M=" << ts_o.mc << ")\n";
      }
      return 0;
    }

    if (sample->parsed()) {
      const Checkpoint ck = load_checkpoint(sm_ckpt);
      Rng rng(sm_c.seed);
      const ArtifactMeta meta = make_meta(sample, sm_c.seed);
      const std::size_t d = ck.dim();
      if (const auto* ts = std::get_if<TwoStageModel>(&ck.model)) {
        const TwoStageSamples s = sample_two_stage(*ts, sm_n, rng);
        if (!sm_intermediate) {
          write_csv_file(sm_c.out, coordinate_header(d), s.denoised, &meta);
          return 0;
        }
        Tensor both(Shape{sm_n, 2 * d});
        for (std::size_t r = 0; r < sm_n; ++r) {
          for (std::size_t j = 0; j < d; ++j) {
            both.at(r, j) = s.smoothed.at(r, j);
            both.at(r, d + j) = s.denoised.at(r, j);
          }
        }
        std::vector<std::string> header = coordinate_header(d, "xt");
        for (const auto& h : coordinate_header(d)) header.push_back(h);
        write_csv_file(sm_c.out, header, both, &meta);
        return 0;
      }
      if (sm_intermediate) throw ContractError("--emit-intermediate needs a two-stage checkpoint");
      write_csv_file(sm_c.out, coordinate_header(d), std::get<MadeModel>(ck.model).sample(Tensor(), sm_n, rng), &meta);
      return 0;
    }

    if (denoise->parsed()) {
      const Checkpoint ck = load_checkpoint(dn_ckpt);
      const Tensor input = load_points(dn_input);
      require_dim(ck.dim(), input.cols(), "input");
      Rng rng(dn_c.seed);
      Tensor result;
      if (const auto* ts = std::get_if<TwoStageModel>(&ck.model)) {
        result = dn_method == "model" ? model_denoise(*ts, input, rng) : single_step_denoise(ts->prior, input, ts->kernel);
      } else {
        if (dn_method == "model") throw ContractError("model denoising needs a two-stage checkpoint");
        if (dn_sigma < 0.0) throw ContractError("single-step denoising of a baseline checkpoint needs --sigma");
        result = single_step_denoise(std::get<MadeModel>(ck.model), input, SmoothingKernel(KernelFamily::Gaussian, dn_sigma, ck.dim()));
      }
      const ArtifactMeta meta = make_meta(denoise, dn_c.seed);
      write_csv_file(dn_c.out, coordinate_header(ck.dim()), result, &meta);
      return 0;
    }

    if (eval->parsed()) {
      const EvalMode mode = eval_mode_from_string(ev_mode);
      const Checkpoint ck = load_checkpoint(ev_ckpt);
      const Tensor data = load_points(ev_data);
      require_dim(ck.dim(), data.cols(), "data");
      ResultRecord rec;
      rec.task = ev_task.empty() ? stem_of(ev_data.substr(ev_data.find_last_of('/') + 1)) : ev_task;
      rec.meta = make_meta(eval, ev_c.seed);
      if (const auto* ts = std::get_if<TwoStageModel>(&ck.model)) {
        Rng rng(ev_c.seed);
        const NllResult r = eval_nll(*ts, data, mode, ev_mc, rng);
        rec.model_kind = "two_stage";
        rec.sigma = ts->kernel.scale();
        rec.family = to_string(ts->kernel.family());
        rec.mc_samples = ev_mc;
        rec.nll_or_elbo = r.nll;
        rec.estimate = "negative_elbo_upper_bound";
      } else {
        if (mode != EvalMode::Exact) throw ContractError("baseline checkpoints are evaluated with --mode exact");
        rec.model_kind = "made";
        rec.nll_or_elbo = eval_nll(std::get<MadeModel>(ck.model), data).nll;
        rec.estimate = "exact_nll";
      }
      const std::string text = rec.to_json() + "\n";
      if (ev_c.out.empty()) {
        out << text;
      } else {
        write_text_file(ev_c.out, text);
      }
      return 0;
    }

    if (grid->parsed()) {
      const Tensor data = load_points(gs_o.data);
      const Split split = split_holdout(data, gs_c.seed);
      const KernelFamily family = kernel_family_from_string(gs_family);
      const GridSearchResult r = grid_search_sigma(family, gs_sigmas, split.train, split.heldout, resolve_arch(gs_o, data.cols(), false),
                                                   resolve_train(gs_o, data.cols(), gs_c.seed), gs_o.mc);
      Tensor table(Shape{r.rows.size(), 2});
      for (std::size_t i = 0; i < r.rows.size(); ++i) {
        table.at(i, 0) = r.rows[i].sigma;
        table.at(i, 1) = r.rows[i].heldout_elbo;
      }
      const ArtifactMeta meta = make_meta(grid, gs_c.seed);
      write_csv_file(gs_c.out, {"sigma", "heldout_elbo"}, table, &meta);
      out << "family " << gs_family << " best_sigma " << fmt(r.best_sigma) << " heldout_elbo " << fmt(r.best_elbo) << " (M=" << gs_o.mc
          << ")\n";
      return 0;
    }

    if (thm1->parsed()) {
      DatasetSpec spec{t1_dataset, 0, t1_c.seed, {}};
      if (!t1_params.empty()) spec.modes = modes_from_params(t1_params);
      const auto rows = theorem1_sweep(spec, kernel_family_from_string(t1_family), t1_sigmas, t1_grid);
      Tensor table(Shape{rows.size(), 4});
      bool all = true;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        table.at(i, 0) = rows[i].sigma;
        table.at(i, 1) = rows[i].lip_original;
        table.at(i, 2) = rows[i].lip_smoothed;
        table.at(i, 3) = rows[i].holds ? 1.0 : 0.0;
        all = all && rows[i].holds;
      }
      const ArtifactMeta meta = make_meta(thm1, t1_c.seed);
      write_csv_file(t1_c.out, {"sigma", "lip_original", "lip_smoothed", "holds"}, table, &meta);
      out << (all ? "holds for every sigma\n" : "VIOLATED for at least one sigma\n");
      return 0;
    }

    if (prop1->parsed()) {
      const AnalyticLogDensity density = p1_density == "normal" ? standard_normal_log_density() : quartic_log_density();
      const SmoothingKernel kernel(kernel_family_from_string(p1_family), p1_sigma, p1_x.size());
      Rng rng(p1_c.seed);
      const Prop1Result r = check_proposition1(density, kernel, p1_x, p1_mc, rng);
      const ArtifactMeta meta = make_meta(prop1, p1_c.seed);
      write_csv_file(p1_c.out, {"lhs", "rhs", "gap", "std_error"}, Tensor::matrix(1, 4, {r.lhs, r.rhs, r.gap, r.std_error}), &meta);
      return 0;
    }

    if (ringd->parsed()) {
      const std::vector<RingComponent> rings =
          rd_geometry == "ring" ? ring_geometry() : (rd_geometry == "rings" ? rings_geometry() : olympics_geometry());
      const auto grads = ring_trajectory_derivatives(rings, rd_offsets);
      Tensor table(Shape{grads.size(), 3});
      for (std::size_t i = 0; i < grads.size(); ++i) {
        table.at(i, 0) = grads[i].offset;
        table.at(i, 1) = grads[i].grad_x;
        table.at(i, 2) = grads[i].grad_y;
      }
      const ArtifactMeta meta = make_meta(ringd, rd_c.seed);
      write_csv_file(rd_c.out, {"c", "grad_x", "grad_y"}, table, &meta);
      return 0;
    }

    if (ablation->parsed()) {
      const Checkpoint ck = load_checkpoint(ab_ckpt);
      const auto* model = std::get_if<MadeModel>(&ck.model);
      if (model == nullptr) throw ContractError("ablation needs a baseline (made) checkpoint");
      Rng rng(ab_c.seed);
      const auto rows = ablation_unsmoothed_denoise(*model, ab_sigmas, ab_n, rng, ab_valley);
      const std::size_t d = model->input_dim();
      Tensor samples(Shape{rows.size() * ab_n, d + 1});
      Tensor summary(Shape{rows.size(), 3});
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t r = 0; r < ab_n; ++r) {
          samples.at(i * ab_n + r, 0) = rows[i].sigma;
          for (std::size_t j = 0; j < d; ++j) samples.at(i * ab_n + r, j + 1) = rows[i].samples.at(r, j);
        }
        summary.at(i, 0) = rows[i].sigma;
        summary.at(i, 1) = rows[i].valley_before;
        summary.at(i, 2) = rows[i].valley_after;
      }
      const ArtifactMeta meta = make_meta(ablation, ab_c.seed);
      std::vector<std::string> header{"sigma"};
      for (const auto& h : coordinate_header(d)) header.push_back(h);
      write_csv_file(ab_c.out, header, samples, &meta);
      write_csv_file(stem_of(ab_c.out) + ".summary.csv", {"sigma", "valley_before", "valley_after"}, summary, &meta);
      out << "valley mass is this tool's chosen sample-quality metric (|x| < " << fmt(ab_valley) << ")\n";
      return 0;
    }

    if (scatter->parsed()) {
      const Tensor points = load_points(sc_input);
      write_text_file(sc_c.out, scatter_svg(points, make_meta(scatter, sc_c.seed)));
      return 0;
    }
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return 3;
  } catch (const ContractError& e) {
    err << "contract error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"smoothar"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace smoothar::cli
