#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stfmm/fmm.hpp"
#include "stfmm/runtime.hpp"

namespace stfmm {

struct LinearOperator {
  std::size_t dimension = 0;
  std::function<void(std::span<const double>, std::span<double>)> apply;

  std::vector<double> operator()(const std::vector<double>& x) const;
};

LinearOperator identity_operator(std::size_t n);
LinearOperator dense_operator(const Eigen::MatrixXd& matrix);
LinearOperator fmm_operator(const FmmOperator& op);
LinearOperator distributed_operator(DistributedFmm& op);

struct GmresOptions {
  double tol = 1e-8;
  int max_iter = 500;
  /// Krylov dimension before a restart; 0 keeps all basis vectors.
  int restart = 0;
};

struct SolveReport {
  int iterations = 0;
  /// Relative residual ||b - A x|| / ||b|| estimates, starting with iteration 0.
  std::vector<double> residuals;
  double seconds = 0.0;
  bool converged = false;
  bool breakdown = false;
};

/// GMRES from the zero initial guess with modified Gram-Schmidt and Givens
/// rotations. A vanishing Hessenberg subdiagonal ends the iteration with
/// breakdown set.
std::vector<double> gmres(const LinearOperator& op, std::span<const double> rhs,
                          const GmresOptions& options, SolveReport& report);

/// Convergence log with header iter,relres.
void write_convergence_csv(std::ostream& out, const SolveReport& report);

enum class RhsMode { dense, fmm };

/// rhs = V_h w_ref by the dense oracle or the sequential FMM.
std::vector<double> manufactured_rhs(const SpaceTimeMesh& mesh, std::span<const double> w_ref,
                                     RhsMode mode, const FmmOperator* fmm = nullptr,
                                     const Eigen::MatrixXd* dense = nullptr);

}  // namespace stfmm
