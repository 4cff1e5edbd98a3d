#include "smartcpd/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "smartcpd/errors.hpp"
#include "smartcpd/parallel.hpp"
#include "smartcpd/rng.hpp"

namespace smartcpd {

void GeneratorSpec::validate() const {
  validate_shape(shape);
  if (rank < 1) throw std::invalid_argument("generator rank must be at least 1");
  if (!(a_max > 0.0) || !std::isfinite(a_max)) throw std::invalid_argument("a_max must be positive");
  if (!(heavy_frac >= 0.0 && heavy_frac <= 1.0)) throw std::invalid_argument("heavy_frac must lie in [0, 1]");
  if (!(heavy_scale > 0.0) || !std::isfinite(heavy_scale)) throw std::invalid_argument("heavy_scale must be positive");
  if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_db must be finite");
}

Observation parse_observation(std::string_view text) {
  if (text == "none") return Observation::none;
  if (text == "poisson") return Observation::poisson;
  if (text == "bernoulli" || text == "bernoulli-odds") return Observation::bernoulli_odds;
  if (text == "gamma") return Observation::gamma;
  if (text == "gaussian") return Observation::gaussian;
  throw std::invalid_argument("unknown observation model '" + std::string(text) + "'");
}

std::string observation_name(Observation obs) {
  switch (obs) {
    case Observation::none: return "none";
    case Observation::poisson: return "poisson";
    case Observation::bernoulli_odds: return "bernoulli-odds";
    case Observation::gamma: return "gamma";
    case Observation::gaussian: return "gaussian";
  }
  return "unknown";
}

FactorModel gen_factors(const GeneratorSpec& spec) {
  spec.validate();
  std::mt19937_64 engine(derive_seed(spec.seed, 1));
  std::uniform_real_distribution<double> base(0.0, spec.a_max);
  std::uniform_real_distribution<double> heavy(0.0, spec.heavy_scale * spec.a_max);
  std::vector<Matrix> factors;
  for (std::size_t n = 0; n < spec.shape.size(); ++n) {
    const auto rows = static_cast<Eigen::Index>(spec.shape[n]);
    const auto cols = static_cast<Eigen::Index>(spec.rank);
    Matrix a(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index r = 0; r < cols; ++r) a(i, r) = base(engine);
    }
    const auto heavy_count = static_cast<std::size_t>(std::ceil(spec.heavy_frac * static_cast<double>(rows) - 1e-12));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(rows));
    for (Eigen::Index r = 0; r < cols; ++r) {
      for (Eigen::Index i = 0; i < rows; ++i) order[static_cast<std::size_t>(i)] = i;
      // Partial Fisher-Yates: the first heavy_count slots are a uniform subset.
      for (std::size_t k = 0; k < heavy_count; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, order.size() - 1);
        std::swap(order[k], order[pick(engine)]);
        a(order[k], r) = heavy(engine);
      }
    }
    if (spec.simplex) {
      for (Eigen::Index r = 0; r < cols; ++r) {
        const double s = a.col(r).sum();
        if (!(s > 0.0)) throw DomainError("gen_factors: zero column cannot be normalized");
        a.col(r) /= s;
      }
    }
    factors.push_back(std::move(a));
  }
  return FactorModel(std::move(factors));
}

DenseTensor observe(const FactorModel& model, const GeneratorSpec& spec) {
  DenseTensor m = full_tensor(model);
  if (spec.observation == Observation::none) return m;
  const std::span<const double> mv = m.values();
  for (double v : mv) {
    if (!std::isfinite(v)) throw DomainError("observe: non-finite model entry");
    if (spec.observation != Observation::gaussian && v < 0.0) {
      throw DomainError("observe: negative model entry for " + observation_name(spec.observation) + " observations");
    }
  }
  const double ratio = std::pow(10.0, spec.snr_db / 10.0);
  double sigma = 0.0;
  if (spec.observation == Observation::gaussian) {
    double energy = 0.0;
    for (double v : mv) energy += v * v;
    sigma = std::sqrt(energy / (static_cast<double>(mv.size()) * ratio));
  }
  const std::uint64_t key = derive_seed(spec.seed, 2);
  DenseTensor x(m.shape());
  std::span<double> xv = x.values();
  const Observation obs = spec.observation;
  parallel::parallel_for(static_cast<std::int64_t>(mv.size()), 64, [&](std::int64_t k) {
    SplitMix64 rng = stream_for(key, static_cast<std::uint64_t>(k));
    const double mean = mv[static_cast<std::size_t>(k)];
    double out = mean;
    switch (obs) {
      case Observation::poisson:
        if (mean > 0.0) {
          std::poisson_distribution<long long> d(mean);
          out = static_cast<double>(d(rng));
        } else {
          out = 0.0;
        }
        break;
      case Observation::bernoulli_odds: {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        out = u(rng) < mean / (1.0 + mean) ? 1.0 : 0.0;
        break;
      }
      case Observation::gamma: {
        std::gamma_distribution<double> d(ratio, 1.0 / ratio);
        out = mean * d(rng);
        break;
      }
      case Observation::gaussian: {
        std::normal_distribution<double> d(0.0, sigma);
        out = mean + d(rng);
        break;
      }
      case Observation::none:
        break;
    }
    xv[static_cast<std::size_t>(k)] = out;
  });
  return x;
}

double realized_snr_db(const DenseTensor& model, const DenseTensor& observed) {
  if (model.shape() != observed.shape()) throw std::invalid_argument("realized_snr_db: shape mismatch");
  double signal = 0.0, noise = 0.0;
  const auto m = model.values();
  const auto x = observed.values();
  for (std::size_t k = 0; k < m.size(); ++k) {
    signal += m[k] * m[k];
    noise += (x[k] - m[k]) * (x[k] - m[k]);
  }
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

}  // namespace smartcpd
