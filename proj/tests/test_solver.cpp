#include <doctest.h>

#include <sstream>
#include <stdexcept>

#include "common.hpp"
#include "stfmm/solver.hpp"

using namespace stfmm;
using testing::SmallProblem;

namespace {

const SmallProblem& problem() {
  static const SmallProblem p;
  return p;
}

const Eigen::MatrixXd& dense() {
  static const Eigen::MatrixXd d = assemble_dense(problem().integrator);
  return d;
}

Eigen::MatrixXd perturbed_identity(int n, unsigned seed) {
  const auto r = testing::random_vector(static_cast<std::size_t>(n) * n, seed);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) += 0.3 / std::sqrt(n) * r[i * n + j];
  return a;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("identity converges at once") {
  const auto b = testing::random_vector(50, 1);
  SolveReport report;
  const auto x = gmres(identity_operator(50), b, {}, report);
  CHECK(report.converged);
  CHECK(report.iterations == 1);
  CHECK(testing::relative_error(x, b) <= 1e-15);
  REQUIRE(report.residuals.size() == 2);
  CHECK(report.residuals[0] == 1.0);
  CHECK(report.residuals[1] <= 1e-15);
}

TEST_CASE("small dense systems") {
  const int n = 60;
  const Eigen::MatrixXd a = perturbed_identity(n, 2);
  const auto b = testing::random_vector(n, 3);
  const Eigen::VectorXd ref = a.partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(b.data(), n));
  for (int restart : {0, 7}) {
    SolveReport report;
    const auto x = gmres(dense_operator(a), b, {1e-12, 500, restart}, report);
    CHECK(report.converged);
    CHECK(testing::relative_error(x, to_vector(ref)) <= 1e-10);
    CHECK(report.residuals.back() <= 1e-12);
    for (std::size_t i = 1; i < report.residuals.size(); ++i)
      CHECK(report.residuals[i] <= report.residuals[i - 1] * (1 + 1e-12));
    for (double r : report.residuals) CHECK(r >= 0.0);
  }

  SolveReport capped;
  gmres(dense_operator(a), b, {1e-14, 3, 0}, capped);
  CHECK_FALSE(capped.converged);
  CHECK(capped.iterations == 3);

  SolveReport zero;
  const auto x0 = gmres(dense_operator(a), std::vector<double>(n, 0.0), {}, zero);
  CHECK(zero.converged);
  CHECK(zero.iterations == 0);
  for (double v : x0) CHECK(v == 0.0);

  SolveReport bad;
  CHECK_THROWS_AS(gmres(dense_operator(a), std::vector<double>(n + 1, 1.0), {}, bad),
                  std::invalid_argument);
  CHECK_THROWS_AS(gmres(dense_operator(a), b, {0.0, 10, 0}, bad), std::invalid_argument);
}

TEST_CASE("breakdown returns the current iterate") {
  Eigen::MatrixXd a(2, 2);
  a << 0, 1, 0, 0;
  SolveReport report;
  const auto x = gmres(dense_operator(a), std::vector<double>{1.0, 0.0}, {}, report);
  CHECK(report.breakdown);
  CHECK_FALSE(report.converged);
  CHECK(x.size() == 2);
  for (double v : x) CHECK(std::isfinite(v));
}

TEST_CASE("convergence csv") {
  SolveReport report;
  report.iterations = 2;
  report.residuals = {1.0, 0.5, 0.125};
  std::ostringstream out;
  write_convergence_csv(out, report);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "iter,relres");
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(line.rfind(std::to_string(rows) + ",", 0) == 0);
    CHECK(std::stod(line.substr(line.find(',') + 1)) == report.residuals[rows]);
    ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("manufactured right-hand sides") {
  const auto& p = problem();
  const std::size_t n = p.mesh.n_dofs();
  const auto zero = manufactured_rhs(p.mesh, std::vector<double>(n, 0.0), RhsMode::fmm, &p.op);
  for (double v : zero) CHECK(v == 0.0);

  const auto w = testing::random_vector(n, 4);
  const auto rd = manufactured_rhs(p.mesh, w, RhsMode::dense, nullptr, &dense());
  const auto rf = manufactured_rhs(p.mesh, w, RhsMode::fmm, &p.op);
  CHECK(testing::relative_error(rf, rd) <= 1e-4);

  const int ex = p.mesh.n_space();
  auto w2 = w;
  for (std::size_t i = ex; i < n; ++i) w2[i] = -3.0 * w[i];
  const auto rd2 = manufactured_rhs(p.mesh, w2, RhsMode::dense, nullptr, &dense());
  for (int i = 0; i < ex; ++i) CHECK(rd2[i] == rd[i]);

  CHECK_THROWS_AS(manufactured_rhs(p.mesh, std::vector<double>(n - 1), RhsMode::fmm, &p.op),
                  std::invalid_argument);
  CHECK_THROWS_AS(manufactured_rhs(p.mesh, w, RhsMode::dense), std::invalid_argument);
}

TEST_CASE("single-layer solves") {
  const auto& p = problem();
  const std::size_t n = p.mesh.n_dofs();
  const auto w_ref = testing::random_vector(n, 6);
  const auto rhs = manufactured_rhs(p.mesh, w_ref, RhsMode::dense, nullptr, &dense());

  SolveReport rd;
  const auto xd = gmres(dense_operator(dense()), rhs, {}, rd);
  CHECK(rd.converged);
  const Eigen::VectorXd ref = dense().partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), n));
  CHECK(testing::relative_error(xd, to_vector(ref)) <= 1e-6);
  CHECK(testing::relative_error(xd, w_ref) <= 1e-5);

  SolveReport rf;
  const auto xf = gmres(fmm_operator(p.op), rhs, {}, rf);
  CHECK(rf.converged);
  CHECK(testing::relative_error(xf, xd) <= 1e-3);

  RuntimeOptions o;
  o.workers = 1;
  for (int ranks : {2, 4}) {
    DistributedFmm d(p.op, ranks, o);
    SolveReport rr;
    const auto xr = gmres(distributed_operator(d), rhs, {}, rr);
    CHECK(rr.converged);
    CHECK(rr.iterations == rf.iterations);
    CHECK(xr == xf);
  }
}
