#include "smartcpd/bregman.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

#include "smartcpd/errors.hpp"

namespace smartcpd {

MirrorMap MirrorMap::quadratic(Constraint constraint) { return {Generator::quadratic, 2.0, constraint}; }
MirrorMap MirrorMap::neglog() { return {Generator::neglog, 0.0, Constraint::nonneg_orthant}; }
MirrorMap MirrorMap::entropy(Constraint constraint) { return {Generator::entropy, 1.0, constraint}; }
MirrorMap MirrorMap::power(double exponent) {
  MirrorMap m{Generator::power, exponent, Constraint::nonneg_orthant};
  m.validate();
  return m;
}

void MirrorMap::validate() const {
  if (!(domain_floor > 0.0)) throw std::invalid_argument("mirror domain floor must be positive");
  if (generator == Generator::power && !(exponent > 1.0 || exponent < 0.0)) {
    throw std::invalid_argument("power generator needs exponent c > 1 or c < 0");
  }
  if (constraint == Constraint::column_simplex && generator != Generator::entropy) {
    throw ConfigError("simplex constraint requires the entropy mirror (got " + name() + ")");
  }
  if (positive_domain() && constraint == Constraint::unconstrained) {
    throw ConfigError("mirror " + name() + " needs a nonnegativity or simplex constraint");
  }
}

std::string MirrorMap::name() const {
  switch (generator) {
    case Generator::quadratic: return "quadratic";
    case Generator::neglog: return "neglog";
    case Generator::entropy: return "entropy";
    case Generator::power: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "power:%.17g", exponent);
      return buf;
    }
  }
  return "unknown";
}

Constraint parse_constraint(std::string_view text) {
  if (text == "none" || text == "unconstrained") return Constraint::unconstrained;
  if (text == "nonneg") return Constraint::nonneg_orthant;
  if (text == "simplex") return Constraint::column_simplex;
  throw std::invalid_argument("unknown constraint '" + std::string(text) + "'");
}

std::string constraint_name(Constraint constraint) {
  switch (constraint) {
    case Constraint::unconstrained: return "none";
    case Constraint::nonneg_orthant: return "nonneg";
    case Constraint::column_simplex: return "simplex";
  }
  return "unknown";
}

MirrorMap parse_mirror(std::string_view generator, std::string_view constraint) {
  MirrorMap map;
  map.constraint = parse_constraint(constraint);
  if (generator == "quadratic") {
    map.generator = Generator::quadratic;
  } else if (generator == "neglog") {
    map.generator = Generator::neglog;
  } else if (generator == "entropy") {
    map.generator = Generator::entropy;
  } else if (generator.starts_with("power:")) {
    map.generator = Generator::power;
    const std::string value(generator.substr(6));
    std::size_t used = 0;
    try {
      map.exponent = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size()) throw std::invalid_argument("bad exponent in '" + std::string(generator) + "'");
  } else {
    throw std::invalid_argument("unknown mirror '" + std::string(generator) + "'");
  }
  map.validate();
  return map;
}

namespace {

void require_positive(const MirrorMap& map, double a) {
  if (map.positive_domain() && !(a > 0.0)) {
    throw DomainError("mirror " + map.name() + " needs positive entries, got " + std::to_string(a));
  }
}

}  // namespace

double phi(const MirrorMap& map, double a) {
  require_positive(map, a);
  switch (map.generator) {
    case Generator::quadratic: return 0.5 * a * a;
    case Generator::neglog: return -std::log(a);
    case Generator::entropy: return a * std::log(a);
    case Generator::power: return std::pow(a, map.exponent);
  }
  return 0.0;
}

double phi_prime(const MirrorMap& map, double a) {
  require_positive(map, a);
  switch (map.generator) {
    case Generator::quadratic: return a;
    case Generator::neglog: return -1.0 / a;
    case Generator::entropy: return std::log(a) + 1.0;
    case Generator::power: return map.exponent * std::pow(a, map.exponent - 1.0);
  }
  return 0.0;
}

double phi_second(const MirrorMap& map, double a) {
  require_positive(map, a);
  switch (map.generator) {
    case Generator::quadratic: return 1.0;
    case Generator::neglog: return 1.0 / (a * a);
    case Generator::entropy: return 1.0 / a;
    case Generator::power: return map.exponent * (map.exponent - 1.0) * std::pow(a, map.exponent - 2.0);
  }
  return 0.0;
}

double bregman_div(const MirrorMap& map, double a, double b) {
  require_positive(map, a);
  require_positive(map, b);
  switch (map.generator) {
    case Generator::quadratic: {
      const double d = a - b;
      return 0.5 * d * d;
    }
    case Generator::neglog: {
      const double q = a / b;
      return q - std::log(q) - 1.0;
    }
    case Generator::entropy:
      return a * std::log(a / b) - a + b;
    case Generator::power: {
      const double c = map.exponent;
      return std::pow(a, c) - std::pow(b, c) - c * std::pow(b, c - 1.0) * (a - b);
    }
  }
  return 0.0;
}

double bregman_div(const MirrorMap& map, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("bregman_div: shape mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index r = 0; r < a.cols(); ++r) total += bregman_div(map, a(i, r), b(i, r));
  }
  return total;
}

namespace {

// Entropic step on one simplex column with per-entry scalings:
//   a_i = exp(s_i - nu / gamma_i),  s_i = log a_t,i - g_i / gamma_i,
// with nu chosen so the column sums to one. F(nu) = logsumexp_i(s_i - nu/gamma_i)
// is convex and decreasing, so Newton converges monotonically after one step.
void simplex_entropy_column(Matrix& out, const Matrix& a_t, const Matrix& g, const Matrix& gamma, Eigen::Index r) {
  const Eigen::Index rows = a_t.rows();
  std::vector<double> s(static_cast<std::size_t>(rows));
  double gamma_mean = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    s[static_cast<std::size_t>(i)] = std::log(a_t(i, r)) - g(i, r) / gamma(i, r);
    gamma_mean += gamma(i, r);
  }
  gamma_mean /= static_cast<double>(rows);

  std::vector<double> z(static_cast<std::size_t>(rows));
  auto evaluate = [&](double nu, double& value, double& slope) {
    double zmax = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < rows; ++i) {
      z[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(i)] - nu / gamma(i, r);
      zmax = std::max(zmax, z[static_cast<std::size_t>(i)]);
    }
    double sum = 0.0, weighted = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double e = std::exp(z[static_cast<std::size_t>(i)] - zmax);
      sum += e;
      weighted += e / gamma(i, r);
    }
    value = zmax + std::log(sum);
    slope = -weighted / sum;
  };

  double zmax0 = *std::max_element(s.begin(), s.end());
  double lse = 0.0;
  for (double v : s) lse += std::exp(v - zmax0);
  double nu = gamma_mean * (zmax0 + std::log(lse));
  for (int it = 0; it < 200; ++it) {
    double value = 0.0, slope = 0.0;
    evaluate(nu, value, slope);
    if (!std::isfinite(value) || !std::isfinite(slope) || slope == 0.0) {
      throw DomainExit("simplex entropy step: multiplier search diverged");
    }
    const double step = value / slope;
    nu -= step;
    if (std::abs(value) < 1e-15 || std::abs(step) <= 1e-16 * std::max(1.0, std::abs(nu))) break;
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    out(i, r) = std::exp(s[static_cast<std::size_t>(i)] - nu / gamma(i, r));
    total += out(i, r);
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw DomainExit("simplex entropy step produced a degenerate column");
  out.col(r) /= total;
}

void normalize_simplex_column(Matrix& a, Eigen::Index r, double floor) {
  for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, r) = std::max(a(i, r), floor);
  a.col(r) /= a.col(r).sum();
}

}  // namespace

void project_to_domain(const MirrorMap& map, Matrix& a) {
  if (map.constraint == Constraint::column_simplex) {
    for (Eigen::Index r = 0; r < a.cols(); ++r) normalize_simplex_column(a, r, map.domain_floor);
    return;
  }
  if (map.positive_domain()) {
    a = a.cwiseMax(map.domain_floor);
  } else if (map.constraint == Constraint::nonneg_orthant) {
    a = a.cwiseMax(0.0);
  }
}

void check_feasible(const MirrorMap& map, const Matrix& a, double simplex_tol) {
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index r = 0; r < a.cols(); ++r) {
      const double v = a(i, r);
      if (!std::isfinite(v)) throw DomainError("non-finite factor entry");
      if (map.positive_domain() && !(v > 0.0)) throw DomainError("factor entry not positive under " + map.name());
      if (map.constraint != Constraint::unconstrained && v < 0.0) throw DomainError("negative factor entry");
    }
  }
  if (map.constraint == Constraint::column_simplex) {
    for (Eigen::Index r = 0; r < a.cols(); ++r) {
      if (std::abs(a.col(r).sum() - 1.0) > simplex_tol) throw DomainError("simplex column does not sum to one");
    }
  }
}

Matrix md_update(const MirrorMap& map, const Matrix& a_t, const Matrix& g, const Matrix& gamma) {
  if (a_t.rows() != g.rows() || a_t.cols() != g.cols() || a_t.rows() != gamma.rows() ||
      a_t.cols() != gamma.cols()) {
    throw std::invalid_argument("md_update: shape mismatch");
  }
  for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
    for (Eigen::Index r = 0; r < gamma.cols(); ++r) {
      if (!(gamma(i, r) > 0.0) || !std::isfinite(gamma(i, r))) {
        throw std::invalid_argument("md_update: Gamma must be positive and finite");
      }
      if (!std::isfinite(g(i, r))) throw DomainError("md_update: non-finite gradient entry");
      require_positive(map, a_t(i, r));
    }
  }

  const Eigen::Index rows = a_t.rows(), cols = a_t.cols();
  Matrix out(rows, cols);
  const double floor = map.domain_floor;

  switch (map.generator) {
    case Generator::quadratic: {
      out = a_t - g.cwiseQuotient(gamma);
      if (map.constraint == Constraint::nonneg_orthant) out = out.cwiseMax(0.0);
      if (map.constraint == Constraint::column_simplex) throw ConfigError("quadratic mirror has no simplex step");
      return out;
    }
    case Generator::entropy: {
      if (map.constraint == Constraint::column_simplex) {
        for (Eigen::Index r = 0; r < cols; ++r) {
          simplex_entropy_column(out, a_t, g, gamma, r);
          normalize_simplex_column(out, r, floor);
        }
        return out;
      }
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index r = 0; r < cols; ++r) {
          const double v = a_t(i, r) * std::exp(-g(i, r) / gamma(i, r));
          if (!std::isfinite(v)) throw DomainExit("entropy step overflowed");
          out(i, r) = std::max(v, floor);
        }
      }
      return out;
    }
    case Generator::neglog: {
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index r = 0; r < cols; ++r) {
          const double denom = 1.0 + g(i, r) * a_t(i, r) / gamma(i, r);
          if (!(denom > 0.0) || !std::isfinite(denom)) {
            throw DomainExit("neglog step leaves the positive orthant at (" + std::to_string(i) + ", " +
                             std::to_string(r) + ")");
          }
          out(i, r) = std::max(a_t(i, r) / denom, floor);
        }
      }
      return out;
    }
    case Generator::power: {
      const double c = map.exponent;
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index r = 0; r < cols; ++r) {
          const double base = std::pow(a_t(i, r), c - 1.0) - g(i, r) / (c * gamma(i, r));
          double v = 0.0;
          if (base > 0.0) {
            v = std::pow(base, 1.0 / (c - 1.0));
          } else if (c < 0.0) {
            // The objective is unbounded below as a grows.
            throw DomainExit("power step leaves the domain at (" + std::to_string(i) + ", " + std::to_string(r) +
                             ")");
          }
          // For c > 1 a non-positive base means the objective is increasing
          // on a > 0, so the constrained minimizer is the boundary.
          if (!std::isfinite(v)) throw DomainExit("power step overflowed");
          out(i, r) = std::max(v, floor);
        }
      }
      return out;
    }
  }
  return out;
}

Matrix md_update_with_retry(const MirrorMap& map, const Matrix& a_t, const Matrix& g, const Matrix& gamma,
                            int max_retries, int* retries) {
  Matrix scaled = gamma;
  for (int attempt = 0;; ++attempt) {
    try {
      Matrix out = md_update(map, a_t, g, scaled);
      if (retries) *retries = attempt;
      return out;
    } catch (const DomainExit&) {
      if (attempt >= max_retries) throw;
      scaled *= 2.0;
    }
  }
}

}  // namespace smartcpd
