#include "smartcpd/solver.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "smartcpd/errors.hpp"
#include "smartcpd/gradient.hpp"
#include "smartcpd/metrics.hpp"
#include "smartcpd/rng.hpp"
#include "smartcpd/sampler.hpp"
#include "smartcpd/stationarity.hpp"

namespace smartcpd {

const MirrorMap& SolverConfig::mirror(std::size_t mode) const {
  if (mirrors.empty()) throw ConfigError("no mirror map configured");
  return mirrors.size() == 1 ? mirrors[0] : mirrors.at(mode);
}

void validate_pairing(const LossSpec& loss, const MirrorMap& mirror) {
  mirror.validate();
  const std::string pair = "loss " + loss.name() + " with mirror " + mirror.name() + "/" +
                           constraint_name(mirror.constraint);
  if (loss.m_domain() == MDomain::all_reals && loss.kind != LossKind::euclidean &&
      mirror.generator != Generator::quadratic) {
    throw ConfigError("incompatible " + pair + ": the loss is defined over all real m and needs the quadratic mirror");
  }
  if (loss.m_domain() == MDomain::nonnegative && mirror.constraint == Constraint::unconstrained) {
    throw ConfigError("incompatible " + pair + ": the loss needs nonnegative factors");
  }
}

void SolverConfig::validate(std::size_t order) const {
  loss.validate();
  schedule.validate();
  if (mirrors.size() != 1 && mirrors.size() != order) {
    throw ConfigError("expected 1 or " + std::to_string(order) + " mirror maps, got " + std::to_string(mirrors.size()));
  }
  for (const MirrorMap& m : mirrors) validate_pairing(loss, m);
  if (schedule.kind == ScheduleKind::jensen || schedule.kind == ScheduleKind::mixed) {
    const MirrorMap want = jensen_mirror(loss);
    for (const MirrorMap& m : mirrors) {
      if (m.generator != want.generator || (m.generator == Generator::power && m.exponent != want.exponent) ||
          m.constraint != Constraint::nonneg_orthant) {
        throw ConfigError("the jensen schedule for loss " + loss.name() + " needs mirror " + want.name() +
                          "/nonneg, got " + m.name() + "/" + constraint_name(m.constraint));
      }
    }
  }
  if (inner_iters < 1) throw std::invalid_argument("inner_iters must be at least 1");
  if (!(stop_tol > 0.0)) throw std::invalid_argument("stop_tol must be positive");
  if (!(heldout_fraction > 0.0 && heldout_fraction <= 1.0)) throw std::invalid_argument("heldout_fraction must lie in (0, 1]");
  if (stationarity_lambda < 0.0) throw std::invalid_argument("stationarity_lambda must be nonnegative");
  if (max_domain_retries < 0) throw std::invalid_argument("max_domain_retries must be nonnegative");
}

FactorModel default_init(const Shape& shape, std::size_t rank, const SolverConfig& config) {
  validate_shape(shape);
  if (rank < 1) throw std::invalid_argument("rank must be at least 1");
  std::mt19937_64 engine(derive_seed(config.seed, 3));
  std::vector<Matrix> factors;
  for (std::size_t n = 0; n < shape.size(); ++n) {
    const MirrorMap& map = config.mirror(n);
    const bool simplex = map.constraint == Constraint::column_simplex;
    const bool shifted = map.positive_domain() && !simplex;
    std::uniform_real_distribution<double> dist(shifted ? 0.1 : 0.0, shifted ? 1.1 : 1.0);
    Matrix a(static_cast<Eigen::Index>(shape[n]), static_cast<Eigen::Index>(rank));
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index r = 0; r < a.cols(); ++r) a(i, r) = dist(engine);
    }
    if (simplex || map.positive_domain()) project_to_domain(map, a);
    factors.push_back(std::move(a));
  }
  return FactorModel(std::move(factors));
}

namespace {

std::string context(std::uint64_t iteration, std::size_t mode, std::size_t order) {
  return "iteration " + std::to_string(iteration) + ", mode " + std::to_string(mode + 1) + " of " +
         std::to_string(order) + ": ";
}

}  // namespace

SolverResult smartcpd(const Tensor& tensor, const SolverConfig& config, const FactorModel& init,
                      const SolverHooks& hooks) {
  const Shape& shape = shape_of(tensor);
  const std::size_t order = shape.size();
  if (init.shape() != shape) throw std::invalid_argument("initial factors do not match the tensor shape");
  config.validate(order);
  for (std::size_t n = 0; n < order; ++n) {
    try {
      check_feasible(config.mirror(n), init.factor(n));
    } catch (const DomainError& e) {
      throw DomainError("initial factor for mode " + std::to_string(n + 1) + ": " + e.what());
    }
  }
  if (hooks.truth && (hooks.truth->shape() != shape || hooks.truth->rank() != init.rank())) {
    throw std::invalid_argument("ground-truth factors do not match the tensor shape and rank");
  }

  const auto start = std::chrono::steady_clock::now();
  const std::size_t rank = init.rank();
  const std::uint64_t total = num_entries(shape);
  SolverResult result;
  result.model = init;
  FactorModel& model = result.model;

  std::vector<MirrorMap> mirrors(order);
  for (std::size_t n = 0; n < order; ++n) mirrors[n] = config.mirror(n);
  const bool jensen_first = config.schedule.kind == ScheduleKind::jensen || config.schedule.kind == ScheduleKind::mixed;
  bool use_jensen = jensen_first;
  AdagradState adagrad(shape, rank, config.schedule.b, config.schedule.inclusive);

  std::optional<FiberSample> heldout;
  if (total > config.full_cost_limit) {
    Sampler hs(derive_seed(config.seed, 4));
    const Unfolding unf(shape, 0);
    const auto count = static_cast<std::uint64_t>(
        std::max(1.0, std::ceil(config.heldout_fraction * static_cast<double>(unf.num_fibers()))));
    heldout = FiberSample{0, hs.sample_fibers(unf.num_fibers(), std::min<std::uint64_t>(count, unf.num_fibers()))};
  }

  std::uint64_t samples = 0;
  auto record = [&](std::uint64_t iteration) {
    TraceRecord rec;
    rec.iteration = iteration;
    rec.samples = samples;
    rec.cost = objective_cost(tensor, model, config.loss, heldout);
    if (!std::isfinite(rec.cost)) {
      throw std::runtime_error("non-finite cost at iteration " + std::to_string(iteration));
    }
    if (hooks.truth) rec.mse = factor_mse(model, *hooks.truth);
    if (config.stationarity_lambda > 0.0) {
      rec.stationarity = stationarity_measure(model, tensor, config.loss, config.mirrors, config.stationarity_lambda);
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.trace.push_back(rec);
    if (hooks.on_record) hooks.on_record(rec);
    return rec.cost;
  };

  double epoch_cost = record(0);
  if (config.max_epochs == 0) return result;

  Sampler sampler(config.seed);
  std::uint64_t t = 0;
  while (true) {
    const std::size_t n = sampler.sample_block(order);
    const Unfolding unf(shape, n);
    const std::uint64_t batch = std::min<std::uint64_t>(config.batch_for(rank), unf.num_fibers());
    const FiberSet fibers = sampler.sample_fibers(unf.num_fibers(), batch);
    try {
      const Matrix h = khatri_rao_rows(model, n, fibers);
      const Matrix x = extract_fibers(tensor, n, fibers);
      Matrix& a = model.factor(n);
      for (std::size_t k = 0; k < config.inner_iters; ++k) {
        const Matrix g = sampled_gradient(config.loss, x, h, a);
        if (!g.allFinite()) throw DomainError("non-finite sampled gradient");
        Matrix gamma;
        if (use_jensen) {
          gamma = jensen_gamma(config.loss, x, h, a);
          // Adagrad sums over every past iteration, so the accumulators keep
          // filling before the mixed schedule switches.
          if (config.schedule.kind == ScheduleKind::mixed) adagrad_gamma(adagrad, n, g);
        } else if (config.schedule.is_scalar()) {
          gamma = Matrix::Constant(a.rows(), a.cols(), 1.0 / scalar_eta(config.schedule, t));
        } else {
          gamma = adagrad_gamma(adagrad, n, g);
        }
        int retries = 0;
        Matrix next = md_update_with_retry(mirrors[n], a, g, gamma, config.max_domain_retries, &retries);
        result.domain_retries += static_cast<std::uint64_t>(retries);
        // The Jensen steps divide by the current iterate, so keep it strictly positive.
        if (use_jensen) next = next.cwiseMax(mirrors[n].domain_floor);
        if (!next.allFinite()) throw DomainError("non-finite factor after the mirror step");
        a = std::move(next);
      }
    } catch (const DomainError& e) {
      throw DomainError(context(t, n, order) + e.what());
    }
    ++t;
    samples += batch * shape[n];
    result.iterations = t;
    if (hooks.on_iteration) hooks.on_iteration(t, n, model);

    bool stop = config.max_iterations > 0 && t >= config.max_iterations;
    const bool epoch_done = samples >= (result.epochs + 1) * total;
    if (epoch_done) {
      result.epochs = static_cast<std::size_t>(samples / total);
      const double cost = record(t);
      const double change = relative_change(epoch_cost, cost);
      const double switch_change = damped_relative_change(epoch_cost, cost);
      epoch_cost = cost;
      if (use_jensen && config.schedule.kind == ScheduleKind::mixed) {
        if (switch_change < config.schedule.switch_tol) {
          use_jensen = false;
          result.switched = true;
          for (MirrorMap& m : mirrors) m = MirrorMap::quadratic(Constraint::nonneg_orthant);
        }
      } else if (change < config.stop_tol) {
        result.converged = true;
        stop = true;
      }
      if (result.epochs >= config.max_epochs) stop = true;
    } else if (stop || (config.eval_every > 0 && t % config.eval_every == 0)) {
      record(t);
    }
    if (stop) break;
  }
  return result;
}

}  // namespace smartcpd
