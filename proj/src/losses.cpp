#include "smartcpd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "smartcpd/errors.hpp"

namespace smartcpd {

namespace {

LossSpec checked(LossSpec s) {
  s.validate();
  return s;
}

}  // namespace

LossSpec LossSpec::euclidean() { return {LossKind::euclidean, 2.0, kDefaultEpsilon, false}; }
LossSpec LossSpec::is_div(double epsilon) { return checked({LossKind::is_div, 0.0, epsilon, false}); }
LossSpec LossSpec::gen_kl(double epsilon) { return checked({LossKind::gen_kl, 1.0, epsilon, false}); }
LossSpec LossSpec::poisson_explink() { return {LossKind::poisson_explink, 0.0, kDefaultEpsilon, false}; }
LossSpec LossSpec::bernoulli_odds(double epsilon) { return checked({LossKind::bernoulli_odds, 0.0, epsilon, false}); }
LossSpec LossSpec::logistic() { return {LossKind::logistic, 0.0, kDefaultEpsilon, false}; }

LossSpec LossSpec::beta_div(double beta, double epsilon, bool include_constant) {
  LossSpec s{LossKind::beta_div, beta, epsilon, include_constant};
  s.validate();
  return s;
}

void LossSpec::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("loss epsilon must be positive");
  if (kind == LossKind::beta_div) {
    if (!std::isfinite(beta)) throw std::invalid_argument("beta must be finite");
    if (beta == 0.0 || beta == 1.0) {
      throw std::invalid_argument("beta-divergence with beta = 0 or 1 is the IS or generalized KL loss");
    }
  }
}

MDomain LossSpec::m_domain() const {
  switch (kind) {
    case LossKind::euclidean:
    case LossKind::poisson_explink:
    case LossKind::logistic:
      return MDomain::all_reals;
    default:
      return MDomain::nonnegative;
  }
}

XDomain LossSpec::x_domain() const {
  switch (kind) {
    case LossKind::euclidean:
      return XDomain::all_reals;
    case LossKind::is_div:
    case LossKind::beta_div:
    case LossKind::gen_kl:
      return XDomain::nonnegative;
    case LossKind::poisson_explink:
      return XDomain::count;
    case LossKind::bernoulli_odds:
    case LossKind::logistic:
      return XDomain::binary;
  }
  return XDomain::all_reals;
}

std::string LossSpec::name() const {
  switch (kind) {
    case LossKind::euclidean: return "euclidean";
    case LossKind::is_div: return "is";
    case LossKind::beta_div: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "beta:%.17g", beta);
      return buf;
    }
    case LossKind::gen_kl: return "gen-kl";
    case LossKind::poisson_explink: return "poisson-exp";
    case LossKind::bernoulli_odds: return "bernoulli-odds";
    case LossKind::logistic: return "logistic";
  }
  return "unknown";
}

LossSpec parse_loss(std::string_view text) {
  if (text == "euclidean") return LossSpec::euclidean();
  if (text == "is" || text == "is-div") return LossSpec::is_div();
  if (text == "gen-kl" || text == "kl") return LossSpec::gen_kl();
  if (text == "poisson-exp") return LossSpec::poisson_explink();
  if (text == "bernoulli-odds") return LossSpec::bernoulli_odds();
  if (text == "logistic") return LossSpec::logistic();
  if (text.starts_with("beta:")) {
    const std::string value(text.substr(5));
    std::size_t used = 0;
    double beta = 0.0;
    try {
      beta = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size()) throw std::invalid_argument("bad beta value in loss '" + std::string(text) + "'");
    if (beta == 0.0) return LossSpec::is_div();
    if (beta == 1.0) return LossSpec::gen_kl();
    if (beta == 2.0) return LossSpec::euclidean();
    return LossSpec::beta_div(beta);
  }
  throw std::invalid_argument("unknown loss '" + std::string(text) + "'");
}

bool in_loss_domain(const LossSpec& spec, double x, double m) {
  if (!std::isfinite(x) || !std::isfinite(m)) return false;
  switch (spec.x_domain()) {
    case XDomain::all_reals: break;
    case XDomain::nonnegative:
      if (x < 0.0) return false;
      break;
    case XDomain::count:
      if (x < 0.0 || x != std::floor(x)) return false;
      break;
    case XDomain::binary:
      if (x != 0.0 && x != 1.0) return false;
      break;
  }
  return spec.m_domain() == MDomain::all_reals || m >= 0.0;
}

void check_loss_domain(const LossSpec& spec, double x, double m) {
  auto fail = [&](const char* what) {
    throw DomainError(std::string(what) + " for loss " + spec.name() + " (x = " + std::to_string(x) +
                      ", m = " + std::to_string(m) + ")");
  };
  if (!std::isfinite(x)) fail("non-finite x");
  if (!std::isfinite(m)) fail("non-finite m");
  switch (spec.x_domain()) {
    case XDomain::all_reals: break;
    case XDomain::nonnegative:
      if (x < 0.0) fail("negative x");
      break;
    case XDomain::count:
      if (x < 0.0 || x != std::floor(x)) fail("x is not a count");
      break;
    case XDomain::binary:
      if (x != 0.0 && x != 1.0) fail("x is not binary");
      break;
  }
  if (spec.m_domain() == MDomain::nonnegative && m < 0.0) fail("negative m");
}

double softplus(double m) { return std::max(m, 0.0) + std::log1p(std::exp(-std::abs(m))); }

double sigmoid(double m) {
  if (m >= 0.0) return 1.0 / (1.0 + std::exp(-m));
  const double e = std::exp(m);
  return e / (1.0 + e);
}

double loss_value_unchecked(const LossSpec& s, double x, double m) {
  const double eps = s.epsilon;
  switch (s.kind) {
    case LossKind::euclidean: {
      const double d = x - m;
      return 0.5 * d * d;
    }
    case LossKind::is_div:
      return x / (m + eps) + std::log(m + eps);
    case LossKind::beta_div: {
      const double b = s.beta;
      const double me = m + eps;
      double v = std::pow(me, b) / b - x * std::pow(me, b - 1.0) / (b - 1.0);
      if (s.include_constant) v += std::pow(x, b) / (b * (b - 1.0));
      return v;
    }
    case LossKind::gen_kl:
      return m - x * std::log(m + eps);
    case LossKind::poisson_explink:
      return std::exp(m) - x * m;
    case LossKind::bernoulli_odds:
      return std::log1p(m) - x * std::log(m + eps);
    case LossKind::logistic:
      return softplus(m) - x * m;
  }
  return 0.0;
}

double loss_grad_m_unchecked(const LossSpec& s, double x, double m) {
  const double eps = s.epsilon;
  switch (s.kind) {
    case LossKind::euclidean:
      return m - x;
    case LossKind::is_div: {
      const double me = m + eps;
      return (me - x) / (me * me);
    }
    case LossKind::beta_div: {
      const double me = m + eps;
      return std::pow(me, s.beta - 2.0) * (me - x);
    }
    case LossKind::gen_kl:
      return 1.0 - x / (m + eps);
    case LossKind::poisson_explink:
      return std::exp(m) - x;
    case LossKind::bernoulli_odds:
      return 1.0 / (m + 1.0) - x / (m + eps);
    case LossKind::logistic:
      return sigmoid(m) - x;
  }
  return 0.0;
}

double loss_value(const LossSpec& spec, double x, double m) {
  check_loss_domain(spec, x, m);
  return loss_value_unchecked(spec, x, m);
}

double loss_grad_m(const LossSpec& spec, double x, double m) {
  check_loss_domain(spec, x, m);
  return loss_grad_m_unchecked(spec, x, m);
}

double loss_hess_m(const LossSpec& s, double x, double m) {
  check_loss_domain(s, x, m);
  const double eps = s.epsilon;
  switch (s.kind) {
    case LossKind::euclidean:
      return 1.0;
    case LossKind::is_div: {
      const double me = m + eps;
      return 2.0 * x / (me * me * me) - 1.0 / (me * me);
    }
    case LossKind::beta_div: {
      const double b = s.beta;
      const double me = m + eps;
      return (b - 1.0) * std::pow(me, b - 2.0) - x * (b - 2.0) * std::pow(me, b - 3.0);
    }
    case LossKind::gen_kl: {
      const double me = m + eps;
      return x / (me * me);
    }
    case LossKind::poisson_explink:
      return std::exp(m);
    case LossKind::bernoulli_odds: {
      const double me = m + eps;
      return x / (me * me) - 1.0 / ((m + 1.0) * (m + 1.0));
    }
    case LossKind::logistic: {
      const double p = sigmoid(m);
      return p * (1.0 - p);
    }
  }
  return 0.0;
}

ConvexConcaveSplit convex_concave_split(const LossSpec& spec) {
  const double eps = spec.epsilon;
  switch (spec.kind) {
    case LossKind::euclidean:
      return {[](double x, double m) { return 0.5 * (x - m) * (x - m); }, [](double, double) { return 0.0; }};
    case LossKind::is_div:
      return {[eps](double x, double m) { return x / (m + eps); },
              [eps](double, double m) { return std::log(m + eps); }};
    case LossKind::gen_kl:
      return {[eps](double x, double m) { return -x * std::log(m + eps); }, [](double, double m) { return m; }};
    case LossKind::bernoulli_odds:
      return {[eps](double x, double m) { return -x * std::log(m + eps); },
              [](double, double m) { return std::log1p(m); }};
    case LossKind::beta_div: {
      const double b = spec.beta;
      const bool with_const = spec.include_constant;
      auto power_term = [b, eps](double, double m) { return std::pow(m + eps, b) / b; };
      auto cross_term = [b, eps](double x, double m) { return -x * std::pow(m + eps, b - 1.0) / (b - 1.0); };
      auto constant = [b, with_const](double x) { return with_const ? std::pow(x, b) / (b * (b - 1.0)) : 0.0; };
      if (b < 1.0) {
        // (m+eps)^b / b is concave; the cross term is convex.
        return {[=](double x, double m) { return cross_term(x, m) + constant(x); }, power_term};
      }
      if (b < 2.0) {
        return {[=](double x, double m) { return power_term(x, m) + cross_term(x, m) + constant(x); },
                [](double, double) { return 0.0; }};
      }
      return {[=](double x, double m) { return power_term(x, m) + constant(x); }, cross_term};
    }
    case LossKind::poisson_explink:
    case LossKind::logistic:
      break;
  }
  throw ConfigError("no convex-concave split registered for loss " + spec.name());
}

}  // namespace smartcpd
