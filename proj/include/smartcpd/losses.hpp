#pragma once

// Elementwise losses l(x, m) between an observed entry x and a model entry m.

#include <functional>
#include <string>
#include <string_view>

namespace smartcpd {

enum class LossKind { euclidean, is_div, beta_div, gen_kl, poisson_explink, bernoulli_odds, logistic };

enum class MDomain { all_reals, nonnegative };
enum class XDomain { all_reals, nonnegative, count, binary };

inline constexpr double kDefaultEpsilon = 1e-9;

struct LossSpec {
  LossKind kind = LossKind::euclidean;
  double beta = 2.0;  // beta_div only
  double epsilon = kDefaultEpsilon;
  // beta_div only: add the x-only term x^beta / (beta (beta - 1)) so the
  // value is the divergence itself rather than its optimization-equivalent.
  bool include_constant = false;

  static LossSpec euclidean();
  static LossSpec is_div(double epsilon = kDefaultEpsilon);
  /// Throws for beta in {0, 1}; use is_div / gen_kl instead.
  static LossSpec beta_div(double beta, double epsilon = kDefaultEpsilon, bool include_constant = false);
  static LossSpec gen_kl(double epsilon = kDefaultEpsilon);
  static LossSpec poisson_explink();
  static LossSpec bernoulli_odds(double epsilon = kDefaultEpsilon);
  static LossSpec logistic();

  MDomain m_domain() const;
  XDomain x_domain() const;

  /// Canonical name, accepted by parse_loss.
  std::string name() const;

  void validate() const;
};

/// Parses "euclidean", "is", "gen-kl", "poisson-exp", "bernoulli-odds",
/// "logistic" or "beta:<value>". beta:0, beta:1 and beta:2 map to is,
/// gen-kl and euclidean.
LossSpec parse_loss(std::string_view text);

/// True when (x, m) lies in the loss domain.
bool in_loss_domain(const LossSpec& spec, double x, double m);

/// Throws DomainError when x or m lies outside the loss domain.
void check_loss_domain(const LossSpec& spec, double x, double m);

double loss_value(const LossSpec& spec, double x, double m);
double loss_grad_m(const LossSpec& spec, double x, double m);
double loss_hess_m(const LossSpec& spec, double x, double m);

/// Same formulas without the domain check; for hot loops that validate inputs up front.
double loss_value_unchecked(const LossSpec& spec, double x, double m);
double loss_grad_m_unchecked(const LossSpec& spec, double x, double m);

/// l(x, m) = convex(x, m) + concave(x, m), each in m.
struct ConvexConcaveSplit {
  std::function<double(double, double)> convex;
  std::function<double(double, double)> concave;
};

/// Registered for every loss over nonnegative m; throws ConfigError for
/// poisson_explink and logistic.
ConvexConcaveSplit convex_concave_split(const LossSpec& spec);

/// log(1 + e^m) without overflow.
double softplus(double m);
double sigmoid(double m);

}  // namespace smartcpd
