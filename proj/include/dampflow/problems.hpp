#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace dampflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// All randomness in the library is drawn from this engine. mt19937_64 is
/// fully specified by the standard, so a seed names the same bit stream
/// everywhere; the Gaussian transform is the standard library's and is
/// reproducible per toolchain.
using Rng = std::mt19937_64;

inline Vector gaussian_vector(Rng& rng, Eigen::Index n, double stddev = 1.0)
{
  std::normal_distribution<double> normal(0.0, stddev);
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = normal(rng);
  return out;
}

inline Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  // column-major fill; the order is part of the reproducibility contract
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

/**
 * A differentiable convex objective together with the constants the
 * analysis needs: gradient Lipschitz constant L, optional strong-convexity
 * modulus mu, and the minimizer / minimum when they are known exactly.
 *
 * Instances are immutable after construction. The evaluators capture their
 * data through shared_ptr<const ...>, so copies are cheap and evaluation is
 * safe from concurrent threads.
 */
struct ObjectiveProblem
{
  std::string name;
  int dim = 0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  double lipschitz_L = 0.0;
  std::optional<double> strong_mu;
  std::optional<Vector> minimizer;
  std::optional<double> min_value;

  /// f(x) - f* evaluated without the cancellation of value(x) - min_value.
  /// Only set when the structure of f allows it (quadratics).
  std::function<double(const Vector&)> suboptimality;

  /// Hessian, for problems where it is constant.
  std::shared_ptr<const Matrix> hessian;

  /// f(x) - f_ref, preferring the exact suboptimality when f_ref is f*.
  double gap(const Vector& x, double f_ref) const
  {
    if (suboptimality && min_value && f_ref == *min_value) return suboptimality(x);
    return value(x) - f_ref;
  }
};

/// f(x) = 1/2 x^T A x + b^T x for a symmetric positive semidefinite A.
/// mu and L are read off the spectrum; the minimizer is attached when A is
/// nonsingular.
inline ObjectiveProblem make_quadratic_from(Matrix A, Vector b, std::string name = "quadratic")
{
  if (A.rows() != A.cols() || A.rows() != b.size() || A.rows() < 1)
    throw std::invalid_argument("make_quadratic_from: A must be square and match b");

  A = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(A, Eigen::EigenvaluesOnly);
  const double lam_min = eig.eigenvalues().minCoeff();
  const double lam_max = eig.eigenvalues().maxCoeff();
  if (lam_min < -1e-12 * std::max(1.0, lam_max))
    throw std::invalid_argument("make_quadratic_from: A is not positive semidefinite");

  auto Ap = std::make_shared<const Matrix>(std::move(A));
  auto bp = std::make_shared<const Vector>(std::move(b));

  ObjectiveProblem p;
  p.name = std::move(name);
  p.dim = static_cast<int>(Ap->rows());
  p.value = [Ap, bp](const Vector& x) { return 0.5 * x.dot(*Ap * x) + bp->dot(x); };
  p.gradient = [Ap, bp](const Vector& x) -> Vector { return *Ap * x + *bp; };
  p.lipschitz_L = lam_max;
  p.hessian = Ap;

  if (lam_min > 0.0) {
    p.strong_mu = lam_min;
    Vector xs = Ap->llt().solve(-*bp);
    // one step of refinement keeps the residual at roundoff for cond ~ 1e3..1e6
    xs += Ap->llt().solve(-*bp - *Ap * xs);
    const double fs = 0.5 * bp->dot(xs);
    p.minimizer = xs;
    p.min_value = fs;
    auto xsp = std::make_shared<const Vector>(xs);
    p.suboptimality = [Ap, xsp](const Vector& x) {
      const Vector e = x - *xsp;
      return 0.5 * e.dot(*Ap * e);
    };
  }
  return p;
}

/**
 * Random strongly convex quadratic with a prescribed spectrum range.
 *
 * A = Q^T D Q with Q the orthonormalization of a seeded Gaussian matrix and
 * D uniform on [eig_min, eig_max] except D_1 = eig_min and D_2 = eig_max, so
 * mu and L are exact. b is i.i.d. N(0, b_std^2).
 */
inline ObjectiveProblem make_quadratic(int dim, double eig_min, double eig_max, double b_std,
                                       std::uint64_t seed)
{
  if (dim < 2) throw std::invalid_argument("make_quadratic: dim must be >= 2");
  if (!(eig_min > 0.0)) throw std::invalid_argument("make_quadratic: eig_min must be > 0");
  if (!(eig_max >= eig_min)) throw std::invalid_argument("make_quadratic: need eig_min <= eig_max");
  if (!(b_std >= 0.0)) throw std::invalid_argument("make_quadratic: b_std must be >= 0");

  Rng rng(seed);
  const Matrix G = gaussian_matrix(rng, dim, dim);
  const Matrix Q = Eigen::HouseholderQR<Matrix>(G).householderQ();

  std::uniform_real_distribution<double> uni(eig_min, eig_max);
  Vector D(dim);
  for (int i = 0; i < dim; ++i) D(i) = uni(rng);
  D(0) = eig_min;
  D(1) = eig_max;

  Vector b = b_std > 0.0 ? gaussian_vector(rng, dim, b_std) : Vector::Zero(dim);
  Matrix A = Q.transpose() * D.asDiagonal() * Q;

  ObjectiveProblem p = make_quadratic_from(std::move(A), std::move(b), "quadratic");
  // pin the constants to the construction rather than the eigensolver's estimate
  p.lipschitz_L = eig_max;
  p.strong_mu = eig_min;

  const double residual = (*p.hessian * *p.minimizer + p.gradient(Vector::Zero(dim))).norm();
  if (residual > 1e-8)
    throw std::runtime_error("make_quadratic: minimizer residual " + std::to_string(residual));
  return p;
}

/// f(x) = 1/2 x^T M^{-1} x with M_ij = decay^|i-j|, the Kac-Murdock-Szego
/// matrix. Minimizer 0, minimum 0.
inline ObjectiveProblem make_kms_inverse_quadratic(int dim = 50, double decay = 0.9)
{
  if (dim < 1) throw std::invalid_argument("make_kms_inverse_quadratic: dim must be >= 1");
  if (!(std::abs(decay) < 1.0))
    throw std::invalid_argument("make_kms_inverse_quadratic: |decay| must be < 1");
  Matrix M(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) M(i, j) = std::pow(decay, std::abs(i - j));
  Matrix A = M.llt().solve(Matrix::Identity(dim, dim));
  ObjectiveProblem p = make_quadratic_from(std::move(A), Vector::Zero(dim), "kms_inverse");
  p.minimizer = Vector::Zero(dim);
  p.min_value = 0.0;
  return p;
}

/// Numerically safe softmax.
inline Vector softmax(const Vector& z)
{
  const double m = z.maxCoeff();
  Vector w = (z.array() - m).exp().matrix();
  return w / w.sum();
}

/// Largest singular value of A by power iteration on A^T A.
inline double largest_singular_value(const Matrix& A, double rel_tol = 1e-8, int max_iter = 100000)
{
  Vector v = Vector::Ones(A.cols()).normalized();
  double sigma2 = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = A.transpose() * (A * v);
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (std::abs(next - sigma2) <= rel_tol * next) return std::sqrt(next);
    sigma2 = next;
  }
  throw std::runtime_error("largest_singular_value: power iteration did not converge");
}

/**
 * f(x) = rho * log sum_i exp((a_i^T x - b_i) / rho), A with i.i.d. N(0,1)
 * entries, b i.i.d. N(0, 2). Convex, not strongly convex; L = sigma_max(A)^2 / rho.
 */
inline ObjectiveProblem make_log_sum_exp(int dim, int m, double rho, std::uint64_t seed)
{
  if (dim < 1) throw std::invalid_argument("make_log_sum_exp: dim must be >= 1");
  if (m < 1) throw std::invalid_argument("make_log_sum_exp: m must be >= 1");
  if (!(rho > 0.0)) throw std::invalid_argument("make_log_sum_exp: rho must be > 0");

  Rng rng(seed);
  auto Ap = std::make_shared<const Matrix>(gaussian_matrix(rng, m, dim));
  auto bp = std::make_shared<const Vector>(gaussian_vector(rng, m, std::sqrt(2.0)));

  ObjectiveProblem p;
  p.name = "logsumexp";
  p.dim = dim;
  p.value = [Ap, bp, rho](const Vector& x) {
    const Vector z = (*Ap * x - *bp) / rho;
    const double zmax = z.maxCoeff();
    return rho * (zmax + std::log((z.array() - zmax).exp().sum()));
  };
  p.gradient = [Ap, bp, rho](const Vector& x) -> Vector {
    return Ap->transpose() * softmax((*Ap * x - *bp) / rho);
  };
  const double s = largest_singular_value(*Ap);
  p.lipschitz_L = s * s / rho;
  return p;
}

/// Max over coordinates of |central difference - gradient|, relative to the
/// gradient's scale max(1, ||grad||_inf).
inline double grad_check(const ObjectiveProblem& problem, const Vector& x, double fd_step)
{
  if (!(fd_step > 0.0)) throw std::invalid_argument("grad_check: fd_step must be > 0");
  const Vector g = problem.gradient(x);
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  double worst = 0.0;
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x(i);
    xp(i) = xi + fd_step;
    const double fp = problem.value(xp);
    xp(i) = xi - fd_step;
    const double fm = problem.value(xp);
    xp(i) = xi;
    const double fd = (fp - fm) / (2.0 * fd_step);
    worst = std::max(worst, std::abs(fd - g(i)) / scale);
  }
  return worst;
}

}  // namespace dampflow
