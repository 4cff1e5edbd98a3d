#pragma once

// Bregman generators, divergences and the closed-form mirror-descent step
//
//   A+ = argmin_{A in C}  <G, A> + sum_{i,r} Gamma(i,r) * D_phi(A(i,r), A_t(i,r))
//
// for the (generator, constraint) pairs that admit one.

#include <string>
#include <string_view>

#include "smartcpd/tensor.hpp"

namespace smartcpd {

enum class Generator {
  quadratic,  // a^2 / 2
  neglog,     // -log a
  entropy,    // a log a
  power,      // a^c, c > 1 or c < 0
};

enum class Constraint { unconstrained, nonneg_orthant, column_simplex };

inline constexpr double kDefaultDomainFloor = 1e-12;

struct MirrorMap {
  Generator generator = Generator::quadratic;
  double exponent = 2.0;  // power generator only
  Constraint constraint = Constraint::nonneg_orthant;
  double domain_floor = kDefaultDomainFloor;

  static MirrorMap quadratic(Constraint constraint = Constraint::nonneg_orthant);
  static MirrorMap neglog();
  static MirrorMap entropy(Constraint constraint = Constraint::nonneg_orthant);
  static MirrorMap power(double exponent);

  /// neglog, entropy and power need strictly positive iterates.
  bool positive_domain() const { return generator != Generator::quadratic; }

  /// Rejects column_simplex with anything but entropy, positive-domain
  /// generators without a nonnegativity constraint, and bad exponents.
  void validate() const;

  std::string name() const;
  /// The exponent only matters for the power generator.
  bool operator==(const MirrorMap& other) const {
    return generator == other.generator && constraint == other.constraint && domain_floor == other.domain_floor &&
           (generator != Generator::power || exponent == other.exponent);
  }
};

/// "quadratic", "neglog", "entropy", "power:<c>".
MirrorMap parse_mirror(std::string_view generator, std::string_view constraint);
Constraint parse_constraint(std::string_view text);
std::string constraint_name(Constraint constraint);

double phi(const MirrorMap& map, double a);
double phi_prime(const MirrorMap& map, double a);
double phi_second(const MirrorMap& map, double a);

/// Scalar D_phi(a, b). Throws DomainError outside the generator domain.
double bregman_div(const MirrorMap& map, double a, double b);
/// Entrywise sum of D_phi over two equally shaped matrices.
double bregman_div(const MirrorMap& map, const Matrix& a, const Matrix& b);

/// Closed-form mirror step. Throws DomainExit when the step would leave the
/// generator domain (neglog, or power with c < 0), std::invalid_argument for
/// non-positive Gamma or mismatched shapes.
Matrix md_update(const MirrorMap& map, const Matrix& a_t, const Matrix& g, const Matrix& gamma);

/// md_update that doubles Gamma (halves the step) after each DomainExit.
/// `retries` receives the number of doublings used.
Matrix md_update_with_retry(const MirrorMap& map, const Matrix& a_t, const Matrix& g, const Matrix& gamma,
                            int max_retries = 20, int* retries = nullptr);

/// Moves every entry into the constraint set / generator domain: floors
/// positive-domain iterates and renormalizes simplex columns.
void project_to_domain(const MirrorMap& map, Matrix& a);

/// Throws DomainError if `a` violates the map's constraint or domain.
void check_feasible(const MirrorMap& map, const Matrix& a, double simplex_tol = 1e-9);

}  // namespace smartcpd
