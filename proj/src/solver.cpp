#include "stfmm/solver.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace stfmm {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

std::vector<double> LinearOperator::operator()(const std::vector<double>& x) const {
  std::vector<double> y(dimension, 0.0);
  apply(x, y);
  return y;
}

LinearOperator identity_operator(std::size_t n) {
  return {n, [](std::span<const double> x, std::span<double> y) {
            std::copy(x.begin(), x.end(), y.begin());
          }};
}

LinearOperator dense_operator(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() != matrix.cols()) throw std::invalid_argument("matrix must be square");
  return {static_cast<std::size_t>(matrix.rows()),
          [&matrix](std::span<const double> x, std::span<double> y) {
            Eigen::Map<const Eigen::VectorXd> xv(x.data(), x.size());
            Eigen::Map<Eigen::VectorXd>(y.data(), y.size()) = matrix * xv;
          }};
}

LinearOperator fmm_operator(const FmmOperator& op) {
  return {op.n_dofs(), [&op](std::span<const double> x, std::span<double> y) { op.apply(x, y); }};
}

LinearOperator distributed_operator(DistributedFmm& op) {
  return {op.op().n_dofs(),
          [&op](std::span<const double> x, std::span<double> y) { op.apply(x, y); }};
}

std::vector<double> gmres(const LinearOperator& op, std::span<const double> rhs,
                          const GmresOptions& options, SolveReport& report) {
  const std::size_t n = op.dimension;
  if (rhs.size() != n) throw std::invalid_argument("right-hand side length does not match");
  if (!(options.tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const auto start = std::chrono::steady_clock::now();
  report = {};
  std::vector<double> x(n, 0.0);
  const double bnorm = norm2(rhs);
  report.residuals.push_back(bnorm == 0.0 ? 0.0 : 1.0);
  if (bnorm == 0.0) {
    report.converged = true;
    return x;
  }

  const int max_iter = std::max(0, options.max_iter);
  const int m = options.restart > 0 ? options.restart : max_iter;
  std::vector<double> r(rhs.begin(), rhs.end());
  std::vector<double> ax(n);
  while (report.iterations < max_iter) {
    const double beta = norm2(r);
    std::vector<std::vector<double>> v;
    v.emplace_back(n);
    for (std::size_t i = 0; i < n; ++i) v[0][i] = r[i] / beta;
    std::vector<std::vector<double>> h;  // column j holds h(0..j+1, j)
    std::vector<double> cs, sn, g{beta};
    int j = 0;
    bool stop = false;
    for (; j < m && report.iterations < max_iter; ++j) {
      std::vector<double> w(n, 0.0);
      op.apply(v[j], w);
      const double wnorm = norm2(w);
      std::vector<double> col(j + 2, 0.0);
      for (int i = 0; i <= j; ++i) {
        col[i] = dot(w, v[i]);
        for (std::size_t k = 0; k < n; ++k) w[k] -= col[i] * v[i][k];
      }
      col[j + 1] = norm2(w);
      const double hnext = col[j + 1];
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * col[i] + sn[i] * col[i + 1];
        col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
        col[i] = t;
      }
      const double d = std::hypot(col[j], col[j + 1]);
      if (d == 0.0) {
        // A v_j lies in the span of earlier directions with zero weight: no progress.
        ++report.iterations;
        report.residuals.push_back(std::abs(g[j]) / bnorm);
        report.breakdown = true;
        stop = true;
        break;
      }
      cs.push_back(col[j] / d);
      sn.push_back(col[j + 1] / d);
      col[j] = d;
      col[j + 1] = 0.0;
      g.push_back(-sn[j] * g[j]);
      g[j] = cs[j] * g[j];
      h.push_back(std::move(col));
      ++report.iterations;
      const double rel = std::abs(g[j + 1]) / bnorm;
      report.residuals.push_back(rel);
      if (rel <= options.tol) {
        report.converged = true;
        stop = true;
      } else if (hnext <= 1e-14 * wnorm) {
        report.breakdown = true;
        stop = true;
      }
      if (stop) {
        ++j;
        break;
      }
      v.emplace_back(n);
      for (std::size_t k = 0; k < n; ++k) v[j + 1][k] = w[k] / hnext;
    }
    // Back substitution for the least-squares coefficients.
    std::vector<double> y(j, 0.0);
    for (int i = j - 1; i >= 0; --i) {
      double s = g[i];
      for (int k = i + 1; k < j; ++k) s -= h[k][i] * y[k];
      y[i] = s / h[i][i];
    }
    for (int i = 0; i < j; ++i)
      for (std::size_t k = 0; k < n; ++k) x[k] += y[i] * v[i][k];
    if (stop) break;
    op.apply(x, ax);
    for (std::size_t k = 0; k < n; ++k) r[k] = rhs[k] - ax[k];
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return x;
}

void write_convergence_csv(std::ostream& out, const SolveReport& report) {
  out << "iter,relres\n";
  out.precision(17);
  for (std::size_t i = 0; i < report.residuals.size(); ++i)
    out << i << ',' << report.residuals[i] << '\n';
}

std::vector<double> manufactured_rhs(const SpaceTimeMesh& mesh, std::span<const double> w_ref,
                                     RhsMode mode, const FmmOperator* fmm,
                                     const Eigen::MatrixXd* dense) {
  if (w_ref.size() != mesh.n_dofs()) throw std::invalid_argument("density length does not match");
  std::vector<double> rhs(w_ref.size(), 0.0);
  if (mode == RhsMode::dense) {
    if (!dense) throw std::invalid_argument("dense mode needs the dense matrix");
    dense_operator(*dense).apply(w_ref, rhs);
  } else {
    if (!fmm) throw std::invalid_argument("fmm mode needs the operator");
    fmm->apply(w_ref, rhs);
  }
  return rhs;
}

}  // namespace stfmm
