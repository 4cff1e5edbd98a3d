#include "smartcpd/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "smartcpd/bregman.hpp"
#include "smartcpd/errors.hpp"
#include "smartcpd/io.hpp"
#include "smartcpd/metrics.hpp"
#include "smartcpd/parallel.hpp"
#include "smartcpd/sampler.hpp"
#include "smartcpd/solver.hpp"
#include "smartcpd/stationarity.hpp"
#include "smartcpd/synthdata.hpp"

namespace smartcpd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Usage problems detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Shape parse_shape(const std::string& text) {
  Shape shape;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || v == 0) throw UsageError("bad --shape '" + text + "'");
    shape.push_back(static_cast<std::size_t>(v));
  }
  validate_shape(shape);
  return shape;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory '" + dir.string() + "'");
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw UsageError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw FormatError("write to '" + path.string() + "' failed");
}

// ---- synth ----

struct SynthArgs {
  std::string shape;
  std::size_t rank = 0;
  std::string obs = "poisson";
  double snr_db = 20.0;
  double a_max = 0.5;
  double heavy_frac = 0.05;
  double heavy_scale = 10.0;
  bool simplex = false;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  GeneratorSpec spec;
  spec.shape = parse_shape(a.shape);
  spec.rank = a.rank;
  spec.observation = parse_observation(a.obs);
  spec.snr_db = a.snr_db;
  spec.a_max = a.a_max;
  spec.heavy_frac = a.heavy_frac;
  spec.heavy_scale = a.heavy_scale;
  spec.simplex = a.simplex;
  spec.seed = a.seed ? *a.seed : entropy_seed();
  if (!a.seed) err << "smartcpd synth: no --seed given, using " << spec.seed << '\n';
  spec.validate();
  const fs::path dir(a.out_dir);
  ensure_dir(dir);

  const FactorModel truth = gen_factors(spec);
  const DenseTensor x = observe(truth, spec);
  write_tensor(dir / "tensor.tns", Tensor(x));
  write_factors(dir / "truth", truth);

  json manifest;
  manifest["command"] = "synth";
  manifest["shape"] = spec.shape;
  manifest["rank"] = spec.rank;
  manifest["observation"] = observation_name(spec.observation);
  manifest["snr_db"] = spec.snr_db;
  manifest["a_max"] = spec.a_max;
  manifest["heavy_frac"] = spec.heavy_frac;
  manifest["heavy_scale"] = spec.heavy_scale;
  manifest["simplex"] = spec.simplex;
  manifest["seed"] = spec.seed;
  manifest["tensor"] = "tensor.tns";
  manifest["truth"] = "truth";
  if (spec.observation == Observation::gamma || spec.observation == Observation::gaussian) {
    manifest["realized_snr_db"] = realized_snr_db(full_tensor(truth), x);
  }
  write_json(dir / "manifest.json", manifest);
  out << "wrote " << (dir / "tensor.tns").string() << '\n';
  return kExitOk;
}

// ---- fit ----

struct FitArgs {
  std::string tensor;
  std::size_t rank = 0;
  std::string loss = "gen-kl";
  std::string mirror = "entropy";
  std::string constraint = "nonneg";
  std::string schedule = "adagrad";
  std::string batch = "auto";
  std::size_t inner_iters = 1;
  std::size_t max_epochs = 100;
  std::uint64_t max_iters = 0;
  double stop_tol = 1e-3;
  std::optional<std::uint64_t> seed;
  std::uint64_t eval_every = 0;
  std::string init;
  std::string truth;
  std::string stationarity;
  std::string out_dir;
  std::string manifest;
};

json fit_args_json(const FitArgs& a, std::uint64_t seed) {
  json j;
  j["tensor"] = fs::absolute(a.tensor).string();
  j["rank"] = a.rank;
  j["loss"] = a.loss;
  j["mirror"] = a.mirror;
  j["constraint"] = a.constraint;
  j["schedule"] = a.schedule;
  j["batch_fibers"] = a.batch;
  j["inner_iters"] = a.inner_iters;
  j["max_epochs"] = a.max_epochs;
  j["max_iters"] = a.max_iters;
  j["stop_tol"] = a.stop_tol;
  j["seed"] = seed;
  j["eval_every"] = a.eval_every;
  j["init"] = a.init.empty() ? "" : fs::absolute(a.init).string();
  j["truth"] = a.truth.empty() ? "" : fs::absolute(a.truth).string();
  j["stationarity_lambda"] = a.stationarity;
  return j;
}

FitArgs fit_args_from_manifest(const fs::path& path, const std::string& out_dir) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read manifest '" + path.string() + "'");
  json j;
  try {
    in >> j;
    const json& p = j.at("parameters");
    FitArgs a;
    a.tensor = p.at("tensor").get<std::string>();
    a.rank = p.at("rank").get<std::size_t>();
    a.loss = p.at("loss").get<std::string>();
    a.mirror = p.at("mirror").get<std::string>();
    a.constraint = p.at("constraint").get<std::string>();
    a.schedule = p.at("schedule").get<std::string>();
    a.batch = p.at("batch_fibers").get<std::string>();
    a.inner_iters = p.at("inner_iters").get<std::size_t>();
    a.max_epochs = p.at("max_epochs").get<std::size_t>();
    a.max_iters = p.at("max_iters").get<std::uint64_t>();
    a.stop_tol = p.at("stop_tol").get<double>();
    a.seed = p.at("seed").get<std::uint64_t>();
    a.eval_every = p.at("eval_every").get<std::uint64_t>();
    a.init = p.at("init").get<std::string>();
    a.truth = p.at("truth").get<std::string>();
    a.stationarity = p.at("stationarity_lambda").get<std::string>();
    a.out_dir = out_dir;
    return a;
  } catch (const json::exception& e) {
    throw UsageError("bad manifest '" + path.string() + "': " + e.what());
  }
}

int cmd_fit(FitArgs a, std::ostream& out, std::ostream& err) {
  if (!a.manifest.empty()) {
    if (a.out_dir.empty()) throw UsageError("--out is required");
    a = fit_args_from_manifest(a.manifest, a.out_dir);
  }
  if (a.tensor.empty()) throw UsageError("--tensor is required");
  if (a.rank < 1) throw UsageError("--rank must be at least 1");
  if (a.out_dir.empty()) throw UsageError("--out is required");

  SolverConfig config;
  config.loss = parse_loss(a.loss);
  config.mirrors = {parse_mirror(a.mirror, a.constraint)};
  config.schedule = parse_schedule(a.schedule);
  if (a.batch == "auto") {
    config.batch_fibers = 0;
  } else {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(a.batch, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != a.batch.size() || v == 0) throw UsageError("bad --batch-fibers '" + a.batch + "'");
    config.batch_fibers = static_cast<std::size_t>(v);
  }
  config.inner_iters = a.inner_iters;
  config.max_epochs = a.max_epochs;
  config.max_iterations = a.max_iters;
  config.stop_tol = a.stop_tol;
  config.seed = a.seed ? *a.seed : entropy_seed();
  if (!a.seed) err << "smartcpd fit: no --seed given, using " << config.seed << '\n';
  config.eval_every = a.eval_every;

  const CooTensor coo = read_tensor(fs::path(a.tensor));
  // Dense storage is faster for fiber extraction when it fits comfortably.
  const Tensor tensor = coo.size() <= 50'000'000 ? Tensor(coo.to_dense()) : Tensor(coo);
  const Shape& shape = shape_of(tensor);
  config.validate(shape.size());

  FactorModel init;
  if (!a.init.empty()) {
    init = read_factors(a.init);
    if (init.shape() != shape || init.rank() != a.rank) {
      throw UsageError("--init factors do not match the tensor shape and --rank");
    }
  } else {
    init = default_init(shape, a.rank, config);
  }
  std::optional<FactorModel> truth;
  if (!a.truth.empty()) truth = read_factors(a.truth);

  if (!a.stationarity.empty()) {
    if (a.stationarity == "auto") {
      const double l_hat = estimate_smoothness(init, tensor, config.loss, config.mirrors, config.seed);
      config.stationarity_lambda = default_prox_lambda(l_hat);
    } else {
      config.stationarity_lambda = parse_double(a.stationarity, "--stationarity-lambda");
      if (!(config.stationarity_lambda > 0.0)) throw UsageError("--stationarity-lambda must be positive");
    }
  }

  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  json manifest;
  manifest["command"] = "fit";
  manifest["parameters"] = fit_args_json(a, config.seed);
  manifest["shape"] = shape;
  manifest["factors"] = "factors";
  manifest["trace"] = "trace.csv";
  write_json(dir / "manifest.json", manifest);

  TraceWriter trace(dir / "trace.csv");
  SolverHooks hooks;
  if (truth) hooks.truth = &*truth;
  hooks.on_record = [&](const TraceRecord& rec) { trace.write(rec); };
  const SolverResult result = smartcpd(tensor, config, init, hooks);
  write_factors(dir / "factors", result.model);

  manifest["result"] = {{"iterations", result.iterations},
                        {"epochs", result.epochs},
                        {"converged", result.converged},
                        {"switched", result.switched},
                        {"final_cost", result.trace.back().cost}};
  if (config.stationarity_lambda > 0.0) manifest["parameters"]["stationarity_lambda_value"] = config.stationarity_lambda;
  write_json(dir / "manifest.json", manifest);
  out << "iterations " << result.iterations << ", epochs " << result.epochs << ", final cost "
      << format_double(result.trace.back().cost) << '\n';
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  std::string tensor;
  std::string factors;
  std::string truth;
  std::string loss = "gen-kl";
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const FactorModel model = read_factors(a.factors);
  json result;
  if (!a.tensor.empty()) {
    const CooTensor coo = read_tensor(fs::path(a.tensor));
    const Tensor tensor = coo.size() <= 50'000'000 ? Tensor(coo.to_dense()) : Tensor(coo);
    if (shape_of(tensor) != model.shape()) throw UsageError("factors do not match the tensor shape");
    const LossSpec loss = parse_loss(a.loss);
    result["loss"] = loss.name();
    result["cost"] = objective_cost(tensor, model, loss);
  }
  if (!a.truth.empty()) {
    const FactorModel truth = read_factors(a.truth);
    if (truth.shape() != model.shape() || truth.rank() != model.rank()) {
      throw UsageError("truth factors do not match the estimate");
    }
    result["mse"] = factor_mse(model, truth);
  }
  if (result.empty()) throw UsageError("eval needs --tensor and/or --truth");
  out << result.dump() << '\n';
  return kExitOk;
}

// ---- surrogate-grid ----

struct GridArgs {
  double lo = 0.5;
  double hi = 10.0;
  double step = 0.5;
  std::string out;
};

int cmd_surrogate_grid(const GridArgs& a, std::ostream& out) {
  if (!(a.lo > 0.0) || !(a.hi >= a.lo) || !(a.step > 0.0)) {
    throw UsageError("surrogate-grid needs 0 < lo <= hi and step > 0");
  }
  // l(m) = m - x log(m + eps) at x = 3, h = (1, 1), anchor a_bar = (5, 5).
  const double x = 3.0;
  const double h[2] = {1.0, 1.0};
  const double abar[2] = {5.0, 5.0};
  const LossSpec loss = LossSpec::gen_kl();
  const double eps = loss.epsilon;
  const double mbar = h[0] * abar[0] + h[1] * abar[1];
  const double lbar = loss_value(loss, x, mbar);
  const double dl = loss_grad_m(loss, x, mbar);
  const auto points = static_cast<long>(std::floor((a.hi - a.lo) / a.step + 1e-9)) + 1;

  struct Row {
    MirrorMap map;
    const char* name;
    double gamma;
  };
  // Jensen weights w_r = h_r a_bar_r / (m_bar + eps) split -x log(m + eps) into
  // one-dimensional terms -x w_r log(a_r / a_bar_r) + const with curvature
  // x w_r / a_r^2. The scalings below bound that curvature by Gamma phi''(a_r):
  // exactly for -log a, and over the grid box (a_r >= lo) for the others.
  std::vector<Row> rows;
  double g_neglog = 0.0, g_quad = 0.0, g_ent = 0.0;
  for (int r = 0; r < 2; ++r) {
    const double w = h[r] * abar[r] / (mbar + eps);
    g_neglog = std::max(g_neglog, x * w);
    g_quad = std::max(g_quad, x * w / (a.lo * a.lo));
    g_ent = std::max(g_ent, x * w / a.lo);
  }
  rows.push_back({MirrorMap::quadratic(), "quadratic", g_quad});
  rows.push_back({MirrorMap::neglog(), "neglog", g_neglog});
  rows.push_back({MirrorMap::entropy(), "entropy", g_ent});

  std::ofstream file;
  std::ostream* os = &out;
  if (!a.out.empty()) {
    file.open(a.out, std::ios::trunc);
    if (!file) throw UsageError("cannot write '" + a.out + "'");
    os = &file;
  }
  *os << "phi,a1,a2,loss,surrogate\n";
  for (const Row& row : rows) {
    for (long p = 0; p < points; ++p) {
      for (long q = 0; q < points; ++q) {
        const double a1 = a.lo + static_cast<double>(p) * a.step;
        const double a2 = a.lo + static_cast<double>(q) * a.step;
        const double m = h[0] * a1 + h[1] * a2;
        const double value = loss_value(loss, x, m);
        const double surrogate = lbar + dl * (h[0] * (a1 - abar[0]) + h[1] * (a2 - abar[1])) +
                                 row.gamma * (bregman_div(row.map, a1, abar[0]) + bregman_div(row.map, a2, abar[1]));
        *os << row.name << ',' << format_double(a1) << ',' << format_double(a2) << ',' << format_double(value) << ','
            << format_double(surrogate) << '\n';
      }
    }
  }
  os->flush();
  if (!*os) throw FormatError("write failed");
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  parallel::configure_threads_from_env();
  CLI::App app{"SmartCPD: fiber-sampled stochastic mirror descent for CP decomposition", "smartcpd"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate ground-truth factors and an observed tensor");
  s->add_option("--shape", synth.shape, "Comma-separated dimensions, e.g. 20,20,20")->required();
  s->add_option("--rank", synth.rank, "CP rank")->required();
  s->add_option("--obs", synth.obs, "poisson | bernoulli | gamma | gaussian | none");
  s->add_option("--snr-db", synth.snr_db, "SNR for gamma and gaussian noise");
  s->add_option("--a-max", synth.a_max, "Factor entries are U(0, a_max)");
  s->add_option("--heavy-frac", synth.heavy_frac, "Fraction of entries per column redrawn from U(0, heavy_scale a_max)");
  s->add_option("--heavy-scale", synth.heavy_scale);
  s->add_flag("--simplex", synth.simplex, "Normalize factor columns to sum to one");
  s->add_option("--seed", synth.seed);
  s->add_option("--out", synth.out_dir, "Output directory")->required();

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Decompose a tensor");
  f->add_option("--tensor", fit.tensor, "COO tensor file");
  f->add_option("--rank", fit.rank);
  f->add_option("--loss", fit.loss, "euclidean | is | gen-kl | beta:<b> | poisson-exp | bernoulli-odds | logistic");
  f->add_option("--mirror", fit.mirror, "quadratic | neglog | entropy | power:<c>");
  f->add_option("--constraint", fit.constraint, "none | nonneg | simplex");
  f->add_option("--schedule", fit.schedule, "adagrad[:b=..] | jensen | mixed[:tol=..] | constant:<eta> | sqrt:T=<T> | diminishing[:eta0=..,alpha=..]");
  f->add_option("--batch-fibers", fit.batch, "Fibers per iteration, or auto for 2R");
  f->add_option("--inner-iters", fit.inner_iters);
  f->add_option("--max-epochs", fit.max_epochs);
  f->add_option("--max-iters", fit.max_iters, "Iteration cap, 0 for none");
  f->add_option("--stop-tol", fit.stop_tol);
  f->add_option("--seed", fit.seed);
  f->add_option("--eval-every", fit.eval_every, "Extra trace rows every this many iterations");
  f->add_option("--init", fit.init, "Initial factor stem (<stem>_<n>.csv)");
  f->add_option("--truth", fit.truth, "Ground-truth factor stem for the mse column");
  f->add_option("--stationarity-lambda", fit.stationarity, "auto or a positive value; fills the stationarity column");
  f->add_option("--manifest", fit.manifest, "Re-run the fit recorded in this manifest");
  f->add_option("--out", fit.out_dir, "Output directory");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate factors: objective cost and/or factor MSE");
  e->add_option("--factors", ev.factors, "Factor stem")->required();
  e->add_option("--tensor", ev.tensor);
  e->add_option("--truth", ev.truth);
  e->add_option("--loss", ev.loss);

  GridArgs grid;
  auto* g = app.add_subcommand("surrogate-grid", "Tabulate Jensen surrogates of m - 3 log m around a = (5, 5)");
  g->add_option("--lo", grid.lo);
  g->add_option("--hi", grid.hi);
  g->add_option("--step", grid.step);
  g->add_option("--out", grid.out, "CSV path (stdout if omitted)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "smartcpd: " << ex.what() << '\n';
    return kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out, err);
    if (f->parsed()) return cmd_fit(fit, out, err);
    if (e->parsed()) return cmd_eval(ev, out);
    if (g->parsed()) return cmd_surrogate_grid(grid, out);
  } catch (const UsageError& ex) {
    err << "smartcpd: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& ex) {  // includes ConfigError
    err << "smartcpd: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& ex) {
    err << "smartcpd: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "smartcpd: " << ex.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace smartcpd
