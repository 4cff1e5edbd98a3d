#include "smartcpd/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "smartcpd/errors.hpp"
#include "smartcpd/parallel.hpp"

namespace smartcpd {

namespace {

[[noreturn]] void entry_error(const LossSpec& loss, Eigen::Index j, Eigen::Index i, double x, double m) {
  throw DomainError("entry (fiber row " + std::to_string(j) + ", index " + std::to_string(i) +
                    ") outside the domain of loss " + loss.name() + " (x = " + std::to_string(x) +
                    ", m = " + std::to_string(m) + ")");
}

// Same test as in_loss_domain, with the domain dispatch hoisted out of the entry loop.
template <XDomain XD>
bool x_ok(double x) {
  if constexpr (XD == XDomain::nonnegative) return x >= 0.0;
  if constexpr (XD == XDomain::count) return x >= 0.0 && x == std::floor(x);
  if constexpr (XD == XDomain::binary) return x == 0.0 || x == 1.0;
  return true;
}

template <XDomain XD, bool MNonneg, typename Grad>
void fill_rows(const LossSpec& loss, const Matrix& x, const Matrix& m, Matrix& d, Grad grad) {
  const Eigen::Index cols = x.cols();
  parallel::parallel_for(x.rows(), cols * 8, [&](std::int64_t jj) {
    const auto j = static_cast<Eigen::Index>(jj);
    const double* xr = x.data() + j * cols;
    const double* mr = m.data() + j * cols;
    double* dr = d.data() + j * cols;
    bool ok = true;
    for (Eigen::Index i = 0; i < cols; ++i) {
      const double xv = xr[i], mv = mr[i];
      ok &= std::isfinite(xv) & std::isfinite(mv) & x_ok<XD>(xv) & (!MNonneg || mv >= 0.0);
      dr[i] = grad(xv, mv);
    }
    if (!ok) {
      for (Eigen::Index i = 0; i < cols; ++i) {
        if (!in_loss_domain(loss, xr[i], mr[i])) entry_error(loss, j, i, xr[i], mr[i]);
      }
    }
  });
}

template <typename Grad>
void fill(const LossSpec& loss, const Matrix& x, const Matrix& m, Matrix& d, Grad grad) {
  const bool m_nonneg = loss.m_domain() == MDomain::nonnegative;
  auto dispatch = [&]<XDomain XD>() {
    if (m_nonneg) {
      fill_rows<XD, true>(loss, x, m, d, grad);
    } else {
      fill_rows<XD, false>(loss, x, m, d, grad);
    }
  };
  switch (loss.x_domain()) {
    case XDomain::all_reals: dispatch.template operator()<XDomain::all_reals>(); break;
    case XDomain::nonnegative: dispatch.template operator()<XDomain::nonnegative>(); break;
    case XDomain::count: dispatch.template operator()<XDomain::count>(); break;
    case XDomain::binary: dispatch.template operator()<XDomain::binary>(); break;
  }
}

}  // namespace

Matrix loss_derivative(const LossSpec& loss, const Matrix& x, const Matrix& m) {
  if (x.rows() != m.rows() || x.cols() != m.cols()) throw std::invalid_argument("loss_derivative: shape mismatch");
  Matrix d(x.rows(), x.cols());
  const double eps = loss.epsilon;
  switch (loss.kind) {
    case LossKind::euclidean:
      fill(loss, x, m, d, [](double xv, double mv) { return mv - xv; });
      break;
    case LossKind::is_div:
      fill(loss, x, m, d, [eps](double xv, double mv) {
        const double me = mv + eps;
        return (me - xv) / (me * me);
      });
      break;
    case LossKind::beta_div: {
      const double b2 = loss.beta - 2.0;
      fill(loss, x, m, d, [eps, b2](double xv, double mv) {
        const double me = mv + eps;
        return std::pow(me, b2) * (me - xv);
      });
      break;
    }
    case LossKind::gen_kl:
      fill(loss, x, m, d, [eps](double xv, double mv) { return 1.0 - xv / (mv + eps); });
      break;
    case LossKind::poisson_explink:
      fill(loss, x, m, d, [](double xv, double mv) { return std::exp(mv) - xv; });
      break;
    case LossKind::bernoulli_odds:
      fill(loss, x, m, d, [eps](double xv, double mv) { return 1.0 / (mv + 1.0) - xv / (mv + eps); });
      break;
    case LossKind::logistic:
      fill(loss, x, m, d, [](double xv, double mv) { return sigmoid(mv) - xv; });
      break;
  }
  return d;
}

Matrix sampled_gradient(const LossSpec& loss, const Matrix& x_hat, const Matrix& h_hat, const Matrix& a_t) {
  if (x_hat.rows() != h_hat.rows() || x_hat.cols() != a_t.rows() || h_hat.cols() != a_t.cols()) {
    throw std::invalid_argument("sampled_gradient: inconsistent shapes");
  }
  const Matrix model = h_hat * a_t.transpose();
  const Matrix d = loss_derivative(loss, x_hat, model);
  Matrix g = d.transpose() * h_hat;
  g *= 1.0 / (static_cast<double>(x_hat.rows()) * static_cast<double>(x_hat.cols()));
  return g;
}

Matrix full_gradient(const Tensor& tensor, const FactorModel& model, const LossSpec& loss, std::size_t mode) {
  const Shape& shape = shape_of(tensor);
  if (shape != model.shape()) throw std::invalid_argument("full_gradient: tensor and model shapes differ");
  const Unfolding unf(shape, mode);
  const std::uint64_t fibers = unf.num_fibers();
  constexpr std::uint64_t kBlock = 256;
  const std::uint64_t blocks = (fibers + kBlock - 1) / kBlock;
  const Matrix& a = model.factor(mode);
  std::vector<Matrix> partial(blocks);
  parallel::parallel_for(static_cast<std::int64_t>(blocks),
                         static_cast<std::int64_t>(kBlock * unf.fiber_length() * model.rank()),
                         [&](std::int64_t b) {
                           const std::uint64_t begin = static_cast<std::uint64_t>(b) * kBlock;
                           const std::uint64_t end = std::min(fibers, begin + kBlock);
                           FiberSet rows(end - begin);
                           for (std::uint64_t k = begin; k < end; ++k) rows[k - begin] = k;
                           const Matrix h = khatri_rao_rows(model, mode, rows);
                           const Matrix x = extract_fibers(tensor, mode, rows);
                           const Matrix m = h * a.transpose();
                           partial[static_cast<std::size_t>(b)] = loss_derivative(loss, x, m).transpose() * h;
                         });
  Matrix g = Matrix::Zero(a.rows(), a.cols());
  for (const Matrix& p : partial) g += p;
  g *= 1.0 / static_cast<double>(num_entries(shape));
  return g;
}

}  // namespace smartcpd
