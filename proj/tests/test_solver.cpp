#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "smartcpd/errors.hpp"
#include "smartcpd/metrics.hpp"
#include "smartcpd/solver.hpp"
#include "smartcpd/stationarity.hpp"
#include "smartcpd/synthdata.hpp"

using namespace smartcpd;

namespace {

struct Instance {
  FactorModel truth;
  Tensor data;
};

Instance make_instance(Shape shape, std::size_t rank, Observation obs, std::uint64_t seed, double heavy = 0.05) {
  GeneratorSpec g;
  g.shape = std::move(shape);
  g.rank = rank;
  g.observation = obs;
  g.seed = seed;
  g.heavy_frac = heavy;
  FactorModel truth = gen_factors(g);
  DenseTensor x = observe(truth, g);
  return {std::move(truth), Tensor(std::move(x))};
}

SolverConfig kl_entropy(std::uint64_t seed, std::size_t epochs) {
  SolverConfig c;
  c.loss = LossSpec::gen_kl();
  c.mirrors = {MirrorMap::entropy()};
  c.schedule = ScheduleSpec::adagrad();
  c.seed = seed;
  c.max_epochs = epochs;
  c.stop_tol = 1e-12;
  return c;
}

// Full-batch majorization-minimization from the truth: the statistical floor of the instance.
double mm_reference_mse(const Instance& inst, std::uint64_t seed) {
  SolverConfig c = kl_entropy(seed, 2000);
  c.schedule = ScheduleSpec::jensen();
  c.mirrors = {MirrorMap::neglog()};
  const Shape& shape = shape_of(inst.data);
  c.batch_fibers = num_entries(shape) / *std::min_element(shape.begin(), shape.end());
  c.stop_tol = 1e-10;
  return factor_mse(smartcpd::smartcpd(inst.data, c, inst.truth).model, inst.truth);
}

}  // namespace

TEST(Solver, ZeroEpochsReturnsInit) {
  const Instance inst = make_instance({6, 5, 4}, 2, Observation::poisson, 1);
  SolverConfig c = kl_entropy(1, 0);
  const FactorModel init = default_init({6, 5, 4}, 2, c);
  const SolverResult r = smartcpd::smartcpd(inst.data, c, init);
  EXPECT_TRUE(r.model == init);
  EXPECT_EQ(r.iterations, 0u);
  ASSERT_EQ(r.trace.size(), 1u);
}

TEST(Solver, ExactRankOneRecovered) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Instance inst = make_instance({10, 10, 10}, 1, Observation::none, seed);
    SolverConfig c = kl_entropy(seed, 200);
    const SolverResult r = smartcpd::smartcpd(inst.data, c, default_init({10, 10, 10}, 1, c));
    EXPECT_LT(factor_mse(r.model, inst.truth), 1e-3) << "seed " << seed;
  }
}

// 20x20x20 Poisson, R = 3. The noise floor here often exceeds 1e-2, so each seed is held
// to max(1e-2, 1.5 x the full-batch MM reference from the truth).
TEST(Solver, PoissonRecoveryNearStatisticalFloor) {
  int pass = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Instance inst = make_instance({20, 20, 20}, 3, Observation::poisson, seed);
    SolverConfig c = kl_entropy(seed, 500);
    const double mse = factor_mse(smartcpd::smartcpd(inst.data, c, default_init({20, 20, 20}, 3, c)).model, inst.truth);
    const double ref = mm_reference_mse(inst, seed);
    const bool ok = mse <= std::max(1e-2, 1.5 * ref);
    pass += ok;
    RecordProperty("seed" + std::to_string(seed), std::to_string(mse) + " ref " + std::to_string(ref));
  }
  EXPECT_GE(pass, 8);
}

TEST(Solver, FeasibilityAndSingleBlockChange) {
  struct Case {
    LossSpec loss;
    MirrorMap mirror;
    ScheduleSpec schedule;
  };
  const std::vector<Case> cases{
      {LossSpec::gen_kl(), MirrorMap::entropy(), ScheduleSpec::adagrad()},
      {LossSpec::gen_kl(), MirrorMap::entropy(Constraint::column_simplex), ScheduleSpec::adagrad()},
      {LossSpec::gen_kl(), MirrorMap::neglog(), ScheduleSpec::jensen()},
      {LossSpec::euclidean(), MirrorMap::quadratic(), ScheduleSpec::constant(0.5)},
      {LossSpec::is_div(), MirrorMap::power(-1.0), ScheduleSpec::mixed()},
      {LossSpec::gen_kl(), MirrorMap::entropy(), ScheduleSpec::diminishing(1.0, 0.6)},
  };
  const Instance inst = make_instance({7, 6, 5}, 2, Observation::poisson, 3);
  const DenseTensor shifted = [&] {
    DenseTensor d = std::get<DenseTensor>(inst.data);
    for (double& v : d.values()) v += 0.5;  // IS needs x > 0 to stay well posed
    return d;
  }();
  for (const Case& cs : cases) {
    SolverConfig c = kl_entropy(4, 20);
    c.loss = cs.loss;
    c.mirrors = {cs.mirror};
    c.schedule = cs.schedule;
    c.inner_iters = 2;
    const Tensor data = cs.loss.kind == LossKind::is_div ? Tensor(shifted) : inst.data;
    const FactorModel init = default_init({7, 6, 5}, 2, c);
    FactorModel prev = init;
    SolverHooks hooks;
    std::uint64_t calls = 0;
    hooks.on_iteration = [&](std::uint64_t t, std::size_t mode, const FactorModel& m) {
      ++calls;
      EXPECT_EQ(t, calls);
      for (std::size_t n = 0; n < 3; ++n) {
        const Matrix& a = m.factor(n);
        if (n != mode) {
          EXPECT_TRUE(a == prev.factor(n)) << "block " << n << " changed at t=" << t;
          continue;
        }
        if (cs.mirror.constraint == Constraint::column_simplex) {
          for (Eigen::Index r = 0; r < a.cols(); ++r) EXPECT_NEAR(a.col(r).sum(), 1.0, 1e-12);
          EXPECT_GE(a.minCoeff(), 0.0);
        } else if (cs.mirror.positive_domain()) {
          EXPECT_GE(a.minCoeff(), cs.mirror.domain_floor);
        } else {
          EXPECT_GE(a.minCoeff(), 0.0);
        }
      }
      prev = m;
    };
    const SolverResult r = smartcpd::smartcpd(data, c, init, hooks);
    EXPECT_EQ(calls, r.iterations) << cs.loss.name();
    EXPECT_GT(r.iterations, 0u);
  }
}

TEST(Solver, Reproducible) {
  const Instance inst = make_instance({8, 8, 8}, 2, Observation::poisson, 5);
  SolverConfig c = kl_entropy(99, 15);
  c.eval_every = 7;
  const FactorModel init = default_init({8, 8, 8}, 2, c);
  const SolverResult a = smartcpd::smartcpd(inst.data, c, init);
  const SolverResult b = smartcpd::smartcpd(inst.data, c, init);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    EXPECT_EQ(a.trace[k].cost, b.trace[k].cost);
    EXPECT_EQ(a.trace[k].iteration, b.trace[k].iteration);
  }
  EXPECT_TRUE(a.model == b.model);
  c.seed = 100;
  EXPECT_FALSE(smartcpd::smartcpd(inst.data, c, init).model == a.model);
}

TEST(Solver, TraceAccounting) {
  const Instance inst = make_instance({8, 8, 8}, 2, Observation::poisson, 6);
  SolverConfig c = kl_entropy(6, 4);
  const SolverResult r = smartcpd::smartcpd(inst.data, c, default_init({8, 8, 8}, 2, c));
  ASSERT_EQ(r.trace.size(), 5u);  // initial row plus one per epoch
  EXPECT_EQ(r.epochs, 4u);
  for (std::size_t k = 1; k < r.trace.size(); ++k) {
    EXPECT_GE(r.trace[k].samples, k * 512u);
    EXPECT_GT(r.trace[k].iteration, r.trace[k - 1].iteration);
    EXPECT_GE(r.trace[k].seconds, r.trace[k - 1].seconds);
  }
  EXPECT_EQ(r.trace.back().iteration, r.iterations);
}

TEST(Solver, StopsOnRelativeChange) {
  const Instance inst = make_instance({8, 8, 8}, 2, Observation::poisson, 7);
  SolverConfig c = kl_entropy(7, 1000);
  c.stop_tol = 1e-3;
  const SolverResult r = smartcpd::smartcpd(inst.data, c, default_init({8, 8, 8}, 2, c));
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.epochs, 1000u);
  const double last = r.trace.back().cost, before = r.trace[r.trace.size() - 2].cost;
  EXPECT_LT(std::abs(last - before) / std::abs(before), 1e-3);
}

// Mixed runs Jensen steps until the damped epoch change drops below the
// tolerance, then continues with Adagrad on the quadratic mirror.
TEST(Solver, MixedScheduleSwitches) {
  GeneratorSpec g;
  g.shape = {20, 20, 20};
  g.rank = 2;
  g.observation = Observation::gamma;
  g.heavy_frac = 0.0;
  g.a_max = 1.0;
  g.seed = 1;
  const FactorModel truth = gen_factors(g);
  const Tensor data(observe(truth, g));
  SolverConfig c = kl_entropy(1, 40);
  c.loss = LossSpec::is_div();
  c.mirrors = {MirrorMap::power(-1.0)};
  c.schedule = ScheduleSpec::jensen();
  const FactorModel init = default_init(g.shape, 2, c);
  const SolverResult jensen = smartcpd::smartcpd(data, c, init);
  c.schedule = ScheduleSpec::mixed(1e-4);
  const SolverResult mixed = smartcpd::smartcpd(data, c, init);
  ASSERT_TRUE(mixed.switched);
  std::size_t k = 1;
  while (k < jensen.trace.size() && damped_relative_change(jensen.trace[k - 1].cost, jensen.trace[k].cost) >= 1e-4) ++k;
  ASSERT_LT(k + 1, jensen.trace.size());
  for (std::size_t e = 0; e <= k; ++e) EXPECT_EQ(mixed.trace[e].cost, jensen.trace[e].cost) << "epoch " << e;
  EXPECT_NE(mixed.trace[k + 1].cost, jensen.trace[k + 1].cost);
  c.schedule = ScheduleSpec::mixed(1e-300);
  const SolverResult never = smartcpd::smartcpd(data, c, init);
  EXPECT_FALSE(never.switched);
  EXPECT_TRUE(never.model == jensen.model);
}

TEST(Solver, JensenDescendsAtFullBatch) {
  const Instance inst = make_instance({6, 6, 6}, 2, Observation::poisson, 9);
  SolverConfig c = kl_entropy(9, 30);
  c.schedule = ScheduleSpec::jensen();
  c.mirrors = {MirrorMap::neglog()};
  c.batch_fibers = 36;
  const SolverResult r = smartcpd::smartcpd(inst.data, c, default_init({6, 6, 6}, 2, c));
  for (std::size_t k = 1; k < r.trace.size(); ++k) {
    EXPECT_LE(r.trace[k].cost, r.trace[k - 1].cost + 1e-12) << k;
  }
}

TEST(Solver, ConfigValidation) {
  SolverConfig c;
  c.loss = LossSpec::logistic();
  c.mirrors = {MirrorMap::entropy()};
  EXPECT_THROW(c.validate(3), ConfigError);
  c.mirrors = {MirrorMap::quadratic(Constraint::unconstrained)};
  EXPECT_NO_THROW(c.validate(3));
  c.loss = LossSpec::gen_kl();
  EXPECT_THROW(c.validate(3), ConfigError);
  c.mirrors = {MirrorMap::entropy(), MirrorMap::entropy()};
  EXPECT_THROW(c.validate(3), ConfigError);
  c.mirrors = {MirrorMap::entropy()};
  c.schedule = ScheduleSpec::jensen();
  EXPECT_THROW(c.validate(3), ConfigError);
  c.mirrors = {MirrorMap::neglog()};
  EXPECT_NO_THROW(c.validate(3));
  c.inner_iters = 0;
  EXPECT_THROW(c.validate(3), std::invalid_argument);
  EXPECT_THROW(validate_pairing(LossSpec::poisson_explink(), MirrorMap::neglog()), ConfigError);
}

TEST(Solver, RejectsBadInit) {
  const Instance inst = make_instance({4, 4, 4}, 2, Observation::poisson, 10);
  SolverConfig c = kl_entropy(1, 1);
  FactorModel init = default_init({4, 4, 4}, 2, c);
  init.factor(1)(0, 0) = -1.0;
  EXPECT_THROW(smartcpd::smartcpd(inst.data, c, init), DomainError);
  EXPECT_THROW(smartcpd::smartcpd(inst.data, c, default_init({4, 4, 5}, 2, c)), std::invalid_argument);
}

TEST(Stationarity, ZeroAtVerifiedStationaryPoint) {
  const Instance inst = make_instance({4, 4, 4}, 2, Observation::poisson, 11);
  SolverConfig c = kl_entropy(11, 20000);
  c.schedule = ScheduleSpec::jensen();
  c.mirrors = {MirrorMap::neglog()};
  c.batch_fibers = 16;
  c.stop_tol = 1e-15;
  const FactorModel fitted = smartcpd::smartcpd(inst.data, c, default_init({4, 4, 4}, 2, c)).model;
  const std::vector<MirrorMap> maps{MirrorMap::entropy()};
  const double lambda = default_prox_lambda(estimate_smoothness(fitted, inst.data, c.loss, maps, 1));
  EXPECT_LT(stationarity_measure(fitted, inst.data, c.loss, maps, lambda), 1e-6);
}

TEST(Stationarity, PositiveAtRandomPoint) {
  const Instance inst = make_instance({5, 5, 5}, 2, Observation::poisson, 12);
  SolverConfig c = kl_entropy(12, 1);
  const FactorModel init = default_init({5, 5, 5}, 2, c);
  const double lambda = default_prox_lambda(estimate_smoothness(init, inst.data, c.loss, c.mirrors, 1));
  const ProxResult p = bregman_prox(init, inst.data, c.loss, c.mirrors, lambda);
  EXPECT_GT(p.measure, 0.0);
  // The measure dwarfs what the inner solve's residual could account for.
  EXPECT_GT(p.measure, 1e3 * p.residual);
  EXPECT_EQ(p.measure, stationarity_measure(init, inst.data, c.loss, c.mirrors, lambda));
}

TEST(Stationarity, DecreasesOverRun) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Instance inst = make_instance({10, 10, 10}, 3, Observation::poisson, seed);
    SolverConfig c = kl_entropy(seed, 50);
    const FactorModel init = default_init({10, 10, 10}, 3, c);
    const double lambda = default_prox_lambda(estimate_smoothness(init, inst.data, c.loss, c.mirrors, seed));
    c.stationarity_lambda = lambda;
    const SolverResult r = smartcpd::smartcpd(inst.data, c, init);
    ASSERT_TRUE(r.trace.front().stationarity && r.trace.back().stationarity);
    EXPECT_LT(*r.trace.back().stationarity, *r.trace.front().stationarity) << "seed " << seed;
  }
}

TEST(Stationarity, SmoothnessEstimatePositiveAndDeterministic) {
  const Instance inst = make_instance({5, 5, 5}, 2, Observation::poisson, 13);
  SolverConfig c = kl_entropy(13, 1);
  const FactorModel init = default_init({5, 5, 5}, 2, c);
  const double l1 = estimate_smoothness(init, inst.data, c.loss, c.mirrors, 3);
  EXPECT_GT(l1, 0.0);
  EXPECT_EQ(l1, estimate_smoothness(init, inst.data, c.loss, c.mirrors, 3));
  EXPECT_THROW(bregman_prox(init, inst.data, c.loss, c.mirrors, 1.0 / (4.0 * l1), ProxOptions{1e-30, 2}),
               ConvergenceError);
}
