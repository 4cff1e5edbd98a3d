#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <omp.h>

#include "smartcpd/errors.hpp"
#include "smartcpd/synthdata.hpp"

using namespace smartcpd;

namespace {

FactorModel constant_model(const Shape& shape, std::size_t rank, double value) {
  std::vector<Matrix> f;
  for (std::size_t n = 0; n < shape.size(); ++n) {
    f.push_back(Matrix::Constant(static_cast<Eigen::Index>(shape[n]), static_cast<Eigen::Index>(rank),
                                 n == 0 ? value : 1.0));
  }
  return FactorModel(std::move(f));
}

double mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double variance(std::span<const double> v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

}  // namespace

TEST(SynthData, PlainUniformInRange) {
  GeneratorSpec g;
  g.shape = {30, 20, 10};
  g.rank = 4;
  g.a_max = 1.0;
  g.heavy_frac = 0.0;
  const FactorModel f = gen_factors(g);
  for (const Matrix& a : f.factors()) {
    EXPECT_GE(a.minCoeff(), 0.0);
    EXPECT_LE(a.maxCoeff(), 1.0);
  }
}

// Base entries are U(0, a_max), so only heavy entries exceed a_max; they do so with
// probability 1 - 1/heavy_scale.
TEST(SynthData, HeavyEntryFraction) {
  GeneratorSpec g;
  g.shape = {4000, 4000};
  g.rank = 10;
  g.seed = 3;
  const FactorModel f = gen_factors(g);
  double above = 0.0, total = 0.0;
  for (const Matrix& a : f.factors()) {
    above += (a.array() > 0.5).count();
    total += a.size();
    EXPECT_LE(a.maxCoeff(), 5.0);
  }
  const double expected = std::ceil(0.05 * 4000) / 4000 * (1.0 - 1.0 / 10.0);
  EXPECT_NEAR(above / total, expected, 0.002);
  EXPECT_NEAR(above / total, 0.045, 0.002);
}

TEST(SynthData, HeavyCountPerColumn) {
  GeneratorSpec g;
  g.shape = {40, 40};
  g.rank = 3;
  g.a_max = 1.0;
  g.heavy_scale = 1000.0;  // heavy draws land above a_max with probability 0.999
  g.heavy_frac = 0.1;
  const FactorModel f = gen_factors(g);
  for (const Matrix& a : f.factors()) {
    for (Eigen::Index r = 0; r < a.cols(); ++r) EXPECT_LE((a.col(r).array() > 1.0).count(), 4);
  }
}

TEST(SynthData, SimplexColumns) {
  GeneratorSpec g;
  g.shape = {25, 30, 35};
  g.rank = 5;
  g.simplex = true;
  const FactorModel f = gen_factors(g);
  for (const Matrix& a : f.factors()) {
    for (Eigen::Index r = 0; r < a.cols(); ++r) EXPECT_NEAR(a.col(r).sum(), 1.0, 1e-12);
    EXPECT_GE(a.minCoeff(), 0.0);
  }
}

TEST(SynthData, ZeroModelPoisson) {
  GeneratorSpec g;
  g.shape = {5, 6, 7};
  g.observation = Observation::poisson;
  const DenseTensor x = observe(constant_model(g.shape, 1, 0.0), g);
  for (double v : x.values()) EXPECT_EQ(v, 0.0);
}

TEST(SynthData, PoissonMoments) {
  GeneratorSpec g;
  g.shape = {50, 50, 40};
  g.observation = Observation::poisson;
  g.seed = 4;
  const DenseTensor x = observe(constant_model(g.shape, 3, 1.0), g);  // M = 3 everywhere
  EXPECT_NEAR(mean(x.values()), 3.0, 0.02);
  EXPECT_NEAR(variance(x.values()), 3.0, 0.05);
  for (double v : x.values()) EXPECT_EQ(v, std::floor(v));
}

TEST(SynthData, BernoulliMean) {
  GeneratorSpec g;
  g.shape = {50, 50, 40};
  g.observation = Observation::bernoulli_odds;
  g.seed = 5;
  const DenseTensor x = observe(constant_model(g.shape, 1, 1.0), g);
  EXPECT_NEAR(mean(x.values()), 0.5, 0.005);
  for (double v : x.values()) EXPECT_TRUE(v == 0.0 || v == 1.0);
}

TEST(SynthData, GammaUnitMeanNoise) {
  GeneratorSpec g;
  g.shape = {50, 50, 40};
  g.observation = Observation::gamma;
  g.snr_db = 10.0;
  g.seed = 6;
  const DenseTensor x = observe(constant_model(g.shape, 1, 1.0), g);
  EXPECT_NEAR(mean(x.values()), 1.0, 0.005);
  EXPECT_NEAR(variance(x.values()), 0.1, 0.005);  // 1 / k with k = 10
  for (double v : x.values()) EXPECT_GT(v, 0.0);
}

TEST(SynthData, GammaSnrCalibration) {
  for (double snr : {0.0, 10.0, 20.0}) {
    GeneratorSpec g;
    g.shape = {100, 100, 100};
    g.rank = 5;
    g.observation = Observation::gamma;
    g.snr_db = snr;
    g.seed = 7;
    const FactorModel f = gen_factors(g);
    const DenseTensor m = full_tensor(f);
    const DenseTensor x = observe(f, g);
    EXPECT_NEAR(realized_snr_db(m, x), snr, 0.5) << snr;
  }
}

TEST(SynthData, GaussianSnrCalibration) {
  GeneratorSpec g;
  g.shape = {60, 60, 60};
  g.rank = 3;
  g.observation = Observation::gaussian;
  g.snr_db = 15.0;
  const FactorModel f = gen_factors(g);
  EXPECT_NEAR(realized_snr_db(full_tensor(f), observe(f, g)), 15.0, 0.1);
}

TEST(SynthData, NoneIsExact) {
  GeneratorSpec g;
  g.shape = {4, 5, 6};
  g.rank = 2;
  g.observation = Observation::none;
  const FactorModel f = gen_factors(g);
  const DenseTensor x = observe(f, g);
  const DenseTensor m = full_tensor(f);
  EXPECT_TRUE(std::equal(x.values().begin(), x.values().end(), m.values().begin()));
  EXPECT_TRUE(std::isinf(realized_snr_db(m, x)));
}

TEST(SynthData, DeterministicAndThreadIndependent) {
  GeneratorSpec g;
  g.shape = {40, 40, 40};
  g.rank = 3;
  g.seed = 11;
  const FactorModel f1 = gen_factors(g);
  EXPECT_TRUE(f1 == gen_factors(g));
  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
  const DenseTensor serial = observe(f1, g);
  omp_set_num_threads(4);
  const DenseTensor parallel = observe(f1, g);
  omp_set_num_threads(threads);
  EXPECT_TRUE(std::equal(serial.values().begin(), serial.values().end(), parallel.values().begin()));
  g.seed = 12;
  EXPECT_FALSE(gen_factors(g) == f1);
}

TEST(SynthData, Errors) {
  GeneratorSpec g;
  g.shape = {3, 3};
  g.heavy_frac = 1.5;
  EXPECT_THROW(gen_factors(g), std::invalid_argument);
  g.heavy_frac = 0.0;
  g.a_max = 0.0;
  EXPECT_THROW(gen_factors(g), std::invalid_argument);
  g.a_max = 1.0;
  g.observation = Observation::poisson;
  FactorModel neg = constant_model(g.shape, 1, -1.0);
  EXPECT_THROW(observe(neg, g), DomainError);
  EXPECT_THROW(parse_observation("binomial"), std::invalid_argument);
  for (Observation o : {Observation::none, Observation::poisson, Observation::bernoulli_odds, Observation::gamma,
                        Observation::gaussian}) {
    EXPECT_EQ(parse_observation(observation_name(o)), o);
  }
}
