#include "smartcpd/stepsize.hpp"

#include <cmath>
#include <limits>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>

#include "smartcpd/errors.hpp"

namespace smartcpd {

ScheduleSpec ScheduleSpec::constant(double eta) {
  ScheduleSpec s;
  s.kind = ScheduleKind::constant;
  s.eta = eta;
  s.validate();
  return s;
}

ScheduleSpec ScheduleSpec::sqrt_horizon(std::uint64_t horizon) {
  ScheduleSpec s;
  s.kind = ScheduleKind::sqrt_horizon;
  s.horizon = horizon;
  s.validate();
  return s;
}

ScheduleSpec ScheduleSpec::diminishing(double eta0, double alpha) {
  ScheduleSpec s;
  s.kind = ScheduleKind::diminishing;
  s.eta0 = eta0;
  s.alpha = alpha;
  s.validate();
  return s;
}

ScheduleSpec ScheduleSpec::adagrad(double b, bool inclusive) {
  ScheduleSpec s;
  s.kind = ScheduleKind::adagrad;
  s.b = b;
  s.inclusive = inclusive;
  s.validate();
  return s;
}

ScheduleSpec ScheduleSpec::jensen() {
  ScheduleSpec s;
  s.kind = ScheduleKind::jensen;
  return s;
}

ScheduleSpec ScheduleSpec::mixed(double switch_tol, double b) {
  ScheduleSpec s;
  s.kind = ScheduleKind::mixed;
  s.switch_tol = switch_tol;
  s.b = b;
  s.validate();
  return s;
}

bool ScheduleSpec::is_scalar() const {
  return kind == ScheduleKind::constant || kind == ScheduleKind::sqrt_horizon || kind == ScheduleKind::diminishing;
}

void ScheduleSpec::validate() const {
  switch (kind) {
    case ScheduleKind::constant:
      if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("constant step needs eta > 0");
      break;
    case ScheduleKind::sqrt_horizon:
      if (horizon == 0) throw std::invalid_argument("sqrt schedule needs T >= 1");
      break;
    case ScheduleKind::diminishing:
      if (!(eta0 > 0.0)) throw std::invalid_argument("diminishing schedule needs eta0 > 0");
      if (!(alpha > 0.5 && alpha <= 1.0)) throw std::invalid_argument("diminishing schedule needs alpha in (0.5, 1]");
      break;
    case ScheduleKind::adagrad:
      if (!(b > 0.0)) throw std::invalid_argument("adagrad offset b must be positive");
      break;
    case ScheduleKind::jensen:
      break;
    case ScheduleKind::mixed:
      if (!(b > 0.0)) throw std::invalid_argument("adagrad offset b must be positive");
      if (!(switch_tol > 0.0)) throw std::invalid_argument("mixed switch tolerance must be positive");
      break;
  }
}

std::string ScheduleSpec::name() const {
  char buf[128];
  switch (kind) {
    case ScheduleKind::constant:
      std::snprintf(buf, sizeof buf, "constant:%.17g", eta);
      return buf;
    case ScheduleKind::sqrt_horizon:
      std::snprintf(buf, sizeof buf, "sqrt:T=%llu", static_cast<unsigned long long>(horizon));
      return buf;
    case ScheduleKind::diminishing:
      std::snprintf(buf, sizeof buf, "diminishing:eta0=%.17g,alpha=%.17g", eta0, alpha);
      return buf;
    case ScheduleKind::adagrad:
      std::snprintf(buf, sizeof buf, inclusive ? "adagrad:b=%.17g" : "adagrad:b=%.17g,inclusive=0", b);
      return buf;
    case ScheduleKind::jensen:
      return "jensen";
    case ScheduleKind::mixed:
      std::snprintf(buf, sizeof buf, "mixed:tol=%.17g,b=%.17g", switch_tol, b);
      return buf;
  }
  return "unknown";
}

namespace {

double parse_number(const std::string& text, const std::string& context) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw std::invalid_argument("bad number '" + text + "' in " + context);
  return v;
}

// "k=v,k=v" or a single bare value stored under "".
std::map<std::string, std::string> parse_params(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size() && !text.empty()) {
    const std::size_t comma = text.find(',', pos);
    const std::string_view item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos) {
      out[""] = std::string(item);
    } else {
      out[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

ScheduleSpec parse_schedule(std::string_view text) {
  const std::size_t colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  const auto params = colon == std::string_view::npos ? std::map<std::string, std::string>{}
                                                      : parse_params(text.substr(colon + 1));
  const std::string context(text);
  auto get = [&](const std::string& key, const std::string& alt, double fallback) {
    if (auto it = params.find(key); it != params.end()) return parse_number(it->second, context);
    if (auto it = params.find(alt); it != params.end()) return parse_number(it->second, context);
    return fallback;
  };
  for (const auto& [key, value] : params) {
    static const char* known[] = {"", "eta", "T", "eta0", "alpha", "b", "tol", "inclusive"};
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("unknown schedule parameter '" + key + "' in " + context);
  }
  if (head == "constant") return ScheduleSpec::constant(get("eta", "", 0.1));
  if (head == "sqrt") {
    const double t = get("T", "", 100.0);
    if (!(t >= 1.0) || t != std::floor(t)) throw std::invalid_argument("sqrt schedule needs an integer T >= 1");
    return ScheduleSpec::sqrt_horizon(static_cast<std::uint64_t>(t));
  }
  if (head == "diminishing") return ScheduleSpec::diminishing(get("eta0", "", 1.0), get("alpha", "alpha", 0.6));
  if (head == "adagrad") {
    const double inclusive = get("inclusive", "inclusive", 1.0);
    if (inclusive != 0.0 && inclusive != 1.0) throw std::invalid_argument("adagrad inclusive must be 0 or 1");
    return ScheduleSpec::adagrad(get("b", "", kDefaultAdagradOffset), inclusive == 1.0);
  }
  if (head == "jensen") return ScheduleSpec::jensen();
  if (head == "mixed") return ScheduleSpec::mixed(get("tol", "", kDefaultSwitchTol), get("b", "b", kDefaultAdagradOffset));
  throw std::invalid_argument("unknown schedule '" + context + "'");
}

double scalar_eta(const ScheduleSpec& spec, std::uint64_t t) {
  switch (spec.kind) {
    case ScheduleKind::constant:
      return spec.eta;
    case ScheduleKind::sqrt_horizon:
      return 1.0 / std::sqrt(static_cast<double>(spec.horizon));
    case ScheduleKind::diminishing:
      return spec.eta0 / std::pow(1.0 + static_cast<double>(t), spec.alpha);
    default:
      throw std::invalid_argument("schedule " + spec.name() + " has no scalar step");
  }
}

AdagradState::AdagradState(const Shape& shape, std::size_t rank, double b, bool inclusive)
    : b_(b), inclusive_(inclusive) {
  if (!(b > 0.0)) throw std::invalid_argument("adagrad offset b must be positive");
  acc_.reserve(shape.size());
  for (std::size_t d : shape) {
    acc_.push_back(Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(rank)));
  }
}

Matrix AdagradState::next_gamma(std::size_t mode, const Matrix& g) {
  Matrix& acc = acc_.at(mode);
  if (g.rows() != acc.rows() || g.cols() != acc.cols()) {
    throw std::invalid_argument("adagrad: gradient shape does not match mode " + std::to_string(mode));
  }
  if (inclusive_) {
    acc.array() += g.array().square();
    return (acc.array() + b_).sqrt().matrix();
  }
  Matrix gamma = (acc.array() + b_).sqrt().matrix();
  acc.array() += g.array().square();
  return gamma;
}

MirrorMap jensen_mirror(const LossSpec& loss) {
  switch (loss.kind) {
    case LossKind::euclidean:
      return MirrorMap::quadratic(Constraint::nonneg_orthant);
    case LossKind::is_div:
      return MirrorMap::power(-1.0);
    case LossKind::gen_kl:
      return MirrorMap::neglog();
    case LossKind::beta_div:
      if (loss.beta > 2.0) return MirrorMap::power(loss.beta);
      if (loss.beta == 2.0) return MirrorMap::quadratic(Constraint::nonneg_orthant);
      if (loss.beta < 1.0) return MirrorMap::power(loss.beta - 1.0);
      break;
    default:
      break;
  }
  throw ConfigError("no Jensen step-size rule for loss " + loss.name());
}

// For one entry (x, m_bar = h^T a_bar) the convex part f(m + eps) is split by
// Jensen's inequality with weights h_r a_bar_r / (m_bar + eps) (plus a constant
// weight for eps); each resulting 1-D term is majorized by L_r * D_phi with
//   euclidean   L_r = h_r m_bar / a_r
//   IS          L_r = h_r x a_r^2 / (m_bar + eps)^2
//   gen-KL      L_r = h_r x a_r / (m_bar + eps)
//   beta > 2    L_r = h_r (m_bar + eps)^(beta-1) / (beta a_r^(beta-1))
//   beta = 2    L_r = h_r (m_bar + eps) / a_r (generator a^2/2)
//   beta < 1    L_r = h_r x (m_bar + eps)^(beta-2) a_r^(2-beta) / (1 - beta)
// Summing over the sampled rows and averaging gives Gamma.
Matrix jensen_gamma(const LossSpec& loss, const Matrix& x_hat, const Matrix& h_hat, const Matrix& a_t,
                    double gamma_min) {
  if (x_hat.rows() != h_hat.rows() || x_hat.cols() != a_t.rows() || h_hat.cols() != a_t.cols()) {
    throw std::invalid_argument("jensen_gamma: inconsistent shapes");
  }
  const MirrorMap map = jensen_mirror(loss);
  (void)map;
  for (Eigen::Index i = 0; i < a_t.rows(); ++i) {
    for (Eigen::Index r = 0; r < a_t.cols(); ++r) {
      if (!(a_t(i, r) > 0.0)) throw DomainError("jensen_gamma: factor entries must be positive");
    }
  }
  const Matrix model = h_hat * a_t.transpose();  // |F| x I_n
  for (Eigen::Index j = 0; j < model.rows(); ++j) {
    for (Eigen::Index i = 0; i < model.cols(); ++i) {
      if (!(model(j, i) > 0.0)) {
        throw DomainError("jensen_gamma: model entry (" + std::to_string(j) + ", " + std::to_string(i) +
                          ") is not positive");
      }
      if (loss.kind != LossKind::euclidean && x_hat(j, i) < 0.0) {
        throw DomainError("jensen_gamma: negative data entry");
      }
    }
  }
  const double eps = loss.epsilon;
  const double scale = 1.0 / (static_cast<double>(x_hat.rows()) * static_cast<double>(x_hat.cols()));
  Matrix gamma;
  switch (loss.kind) {
    case LossKind::euclidean:
      gamma = (model.transpose() * h_hat).cwiseQuotient(a_t);
      break;
    case LossKind::is_div: {
      const Matrix w = (x_hat.array() / (model.array() + eps).square()).matrix();
      gamma = (w.transpose() * h_hat).cwiseProduct(a_t.cwiseProduct(a_t));
      break;
    }
    case LossKind::gen_kl: {
      const Matrix w = (x_hat.array() / (model.array() + eps)).matrix();
      gamma = (w.transpose() * h_hat).cwiseProduct(a_t);
      break;
    }
    case LossKind::beta_div: {
      const double b = loss.beta;
      if (b >= 2.0) {
        const Matrix w = (model.array() + eps).pow(b - 1.0).matrix();
        // At beta = 2 the paired generator is a^2/2, whose curvature is 1 rather than beta (beta - 1).
        const double gen_scale = b == 2.0 ? 1.0 : b;
        gamma = ((w.transpose() * h_hat).array() / (gen_scale * a_t.array().pow(b - 1.0))).matrix();
      } else {
        const Matrix w = (x_hat.array() * (model.array() + eps).pow(b - 2.0)).matrix();
        gamma = ((w.transpose() * h_hat).array() * a_t.array().pow(2.0 - b) / (1.0 - b)).matrix();
      }
      break;
    }
    default:
      throw ConfigError("no Jensen step-size rule for loss " + loss.name());
  }
  gamma *= scale;
  return gamma.cwiseMax(gamma_min);
}

double relative_change(double previous, double current) {
  const double scale = std::abs(previous);
  if (scale == 0.0) return current == previous ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(current - previous) / scale;
}

double damped_relative_change(double previous, double current) {
  return std::abs(current - previous) / std::max(1.0, std::abs(previous));
}

}  // namespace smartcpd
