#pragma once

// Optimization kernels used by the learning layer:
//  - minimize_box: multi-start bounded Nelder-Mead for small nonconvex problems
//  - solve_psd_ls: regularized least squares over a parameter vector whose
//    symmetric matrix image must stay positive semidefinite

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dcep {

// ---------------------------------------------------------------------------
// Box-constrained minimization

struct BoxProblem {
  std::function<double(std::span<const double>)> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::vector<double>> seeds;  // tried before the generated starts
  int budget = 2000;                       // objective evaluations
  int starts = 8;                          // total starts including seeds
  std::uint64_t rng_seed = 0;
};

struct BoxResult {
  std::vector<double> argmin;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool truncated = false;
};

namespace detail {

class BoundedNelderMead {
 public:
  BoundedNelderMead(const BoxProblem& problem, int& evaluations, int budget)
      : p_(problem), n_(problem.lower.size()), evals_(evaluations), budget_(budget) {}

  // Returns true when converged before running out of evaluations.
  bool run(std::vector<double>& x, double& fx) {
    const std::size_t n = n_;
    std::vector<std::vector<double>> simplex(n + 1, x);
    std::vector<double> f(n + 1);
    f[0] = eval(simplex[0]);
    for (std::size_t i = 0; i < n; ++i) {
      const double range = p_.upper[i] - p_.lower[i];
      double h = 0.1 * range;
      if (h == 0.0) h = 0.0;
      std::vector<double>& v = simplex[i + 1];
      v[i] += (v[i] + h <= p_.upper[i]) ? h : -h;
      clamp(v);
      f[i + 1] = eval(v);
    }
    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    bool converged = false;
    while (evals_ < budget_) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return f[a] < f[b] || (f[a] == f[b] && a < b);
      });
      const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
      if (stalled(simplex, f, best, worst)) {
        converged = true;
        break;
      }
      std::fill(centroid.begin(), centroid.end(), 0.0);
      for (std::size_t k = 0; k < n + 1; ++k)
        if (k != worst)
          for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[k][i] / n;

      for (std::size_t i = 0; i < n; ++i) xr[i] = centroid[i] + (centroid[i] - simplex[worst][i]);
      clamp(xr);
      const double fr = eval(xr);
      if (fr < f[best]) {
        for (std::size_t i = 0; i < n; ++i) xe[i] = centroid[i] + 2.0 * (xr[i] - centroid[i]);
        clamp(xe);
        const double fe = eval(xe);
        if (fe < fr) {
          simplex[worst] = xe;
          f[worst] = fe;
        } else {
          simplex[worst] = xr;
          f[worst] = fr;
        }
        continue;
      }
      if (fr < f[second]) {
        simplex[worst] = xr;
        f[worst] = fr;
        continue;
      }
      const bool outside = fr < f[worst];
      for (std::size_t i = 0; i < n; ++i)
        xc[i] = outside ? centroid[i] + 0.5 * (xr[i] - centroid[i])
                        : centroid[i] + 0.5 * (simplex[worst][i] - centroid[i]);
      clamp(xc);
      const double fc = eval(xc);
      if (fc < std::min(fr, f[worst])) {
        simplex[worst] = xc;
        f[worst] = fc;
        continue;
      }
      // Shrink toward the best vertex.
      for (std::size_t k = 0; k < n + 1; ++k) {
        if (k == best) continue;
        for (std::size_t i = 0; i < n; ++i) simplex[k][i] = simplex[best][i] + 0.5 * (simplex[k][i] - simplex[best][i]);
        f[k] = eval(simplex[k]);
      }
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < n + 1; ++k)
      if (f[k] < f[best]) best = k;
    x = simplex[best];
    fx = f[best];
    return converged;
  }

 private:
  double eval(const std::vector<double>& x) {
    ++evals_;
    const double v = p_.objective(std::span<const double>(x));
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  }

  void clamp(std::vector<double>& x) const {
    for (std::size_t i = 0; i < n_; ++i) x[i] = std::clamp(x[i], p_.lower[i], p_.upper[i]);
  }

  bool stalled(const std::vector<std::vector<double>>& s, const std::vector<double>& f, std::size_t best,
               std::size_t worst) const {
    const double fspread = std::abs(f[worst] - f[best]);
    if (fspread > 1e-13 * (1.0 + std::abs(f[best]))) return false;
    for (std::size_t k = 0; k < s.size(); ++k)
      for (std::size_t i = 0; i < n_; ++i) {
        const double range = std::max(p_.upper[i] - p_.lower[i], 1e-300);
        if (std::abs(s[k][i] - s[best][i]) > 1e-9 * range) return false;
      }
    return true;
  }

  const BoxProblem& p_;
  std::size_t n_;
  int& evals_;
  int budget_;
};

}  // namespace detail

inline BoxResult minimize_box(const BoxProblem& problem) {
  const std::size_t n = problem.lower.size();
  if (n == 0 || problem.upper.size() != n) throw std::invalid_argument("box bounds must have equal, nonzero size");
  if (problem.budget <= 0) throw std::invalid_argument("evaluation budget must be positive");
  for (std::size_t i = 0; i < n; ++i)
    if (!(problem.lower[i] <= problem.upper[i])) throw std::invalid_argument("lower bound above upper bound");

  // Starts: caller seeds, then center, four corner patterns, then uniform draws.
  std::vector<std::vector<double>> starts;
  for (auto s : problem.seeds) {
    if (s.size() != n) throw std::invalid_argument("seed dimension mismatch");
    for (std::size_t i = 0; i < n; ++i) s[i] = std::clamp(s[i], problem.lower[i], problem.upper[i]);
    starts.push_back(std::move(s));
  }
  const int wanted = std::max(problem.starts, static_cast<int>(starts.size()));
  std::vector<double> center(n);
  for (std::size_t i = 0; i < n; ++i) center[i] = 0.5 * (problem.lower[i] + problem.upper[i]);
  std::vector<std::vector<double>> generated{center, problem.lower, problem.upper};
  std::vector<double> alt_a(n), alt_b(n);
  for (std::size_t i = 0; i < n; ++i) {
    alt_a[i] = i % 2 == 0 ? problem.lower[i] : problem.upper[i];
    alt_b[i] = i % 2 == 0 ? problem.upper[i] : problem.lower[i];
  }
  generated.push_back(alt_a);
  generated.push_back(alt_b);
  std::mt19937_64 rng(problem.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t g = 0; static_cast<int>(starts.size()) < wanted; ++g) {
    if (g < generated.size()) {
      starts.push_back(generated[g]);
    } else {
      std::vector<double> r(n);
      for (std::size_t i = 0; i < n; ++i) r[i] = problem.lower[i] + unit(rng) * (problem.upper[i] - problem.lower[i]);
      starts.push_back(std::move(r));
    }
  }

  BoxResult result;
  int evals = 0;
  // Half the budget is spread over the starts; the rest refines the best one.
  const int per_start = std::max(static_cast<int>(4 * n), problem.budget / (2 * static_cast<int>(starts.size())));
  for (std::size_t s = 0; s < starts.size() && evals < problem.budget; ++s) {
    std::vector<double> x = starts[s];
    double fx = 0.0;
    detail::BoundedNelderMead nm(problem, evals, std::min(problem.budget, evals + per_start));
    nm.run(x, fx);
    if (fx < result.value || (fx == result.value && x < result.argmin)) {
      result.value = fx;
      result.argmin = x;
    }
  }
  bool converged = false;
  for (int round = 0; round < 8 && evals < problem.budget; ++round) {
    std::vector<double> x = result.argmin;
    double fx = 0.0;
    detail::BoundedNelderMead nm(problem, evals, problem.budget);
    converged = nm.run(x, fx);
    const bool improved = fx < result.value - 1e-12 * (1.0 + std::abs(result.value));
    if (fx < result.value) {
      result.value = fx;
      result.argmin = x;
    }
    // A restart that cannot materially improve a converged simplex means we are done.
    if (converged && !improved) break;
  }
  result.evaluations = evals;
  result.truncated = !converged;
  return result;
}

// ---------------------------------------------------------------------------
// PSD-constrained regularized least squares

using IndexPair = std::pair<int, int>;

// theta -> symmetric matrix with P(i,j) = P(j,i) = theta_l for (i,j) = support[l].
inline Eigen::MatrixXd assemble_symmetric(const Eigen::VectorXd& theta, const std::vector<IndexPair>& support,
                                          int dim) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t l = 0; l < support.size(); ++l) {
    const auto [i, j] = support[l];
    P(i, j) = theta[static_cast<Eigen::Index>(l)];
    P(j, i) = theta[static_cast<Eigen::Index>(l)];
  }
  return P;
}

inline double min_eigenvalue(const Eigen::MatrixXd& P) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Residual map D(theta) = A theta - b.
struct PsdLsProblem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd anchor;
  double alpha = 0.0;
  std::vector<IndexPair> support;
  int matrix_dim = 0;
  bool squared_norms = false;  // ||D||^2 + alpha ||theta - anchor||^2 instead of plain norms
  int max_iterations = 500;
  double tolerance = 1e-8;
};

struct PsdLsResult {
  Eigen::VectorXd theta;
  double objective = 0.0;
  std::vector<double> history;  // objective after every outer iteration, non-increasing
  int iterations = 0;
  bool rank_deficient = false;
  double min_eigenvalue = 0.0;
};

inline double psd_ls_objective(const PsdLsProblem& pr, const Eigen::VectorXd& theta) {
  const double r = (pr.A * theta - pr.b).norm();
  const double d = (theta - pr.anchor).norm();
  return pr.squared_norms ? r * r + pr.alpha * d * d : r + pr.alpha * d;
}

namespace detail {

// Raises the diagonal entries until P_theta is PSD; exact because every
// diagonal entry is a free parameter.
inline void repair_psd(Eigen::VectorXd& theta, const std::vector<IndexPair>& support, int dim) {
  for (int attempt = 0; attempt < 4; ++attempt) {
    const double lmin = min_eigenvalue(assemble_symmetric(theta, support, dim));
    if (lmin >= 0.0) return;
    const double shift = -lmin * (1.0 + 1e-9) + 1e-15;
    for (std::size_t l = 0; l < support.size(); ++l)
      if (support[l].first == support[l].second) theta[static_cast<Eigen::Index>(l)] += shift;
  }
}

// min 1/2 theta' H theta - g' theta  s.t. P_theta PSD, by a log-det barrier
// method: Newton centering on t (1/2 theta' H theta - g' theta) - log det P_theta
// for increasing t. Every iterate is strictly PSD and the final duality gap is
// below tol * max(1, |objective|).
inline Eigen::VectorXd psd_quadratic_min(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                         const std::vector<IndexPair>& support, int dim,
                                         const Eigen::VectorXd& warm, double tol) {
  const Eigen::Index d = H.rows();
  Eigen::VectorXd theta = H.ldlt().solve(g);
  if (!theta.allFinite()) theta = H.completeOrthogonalDecomposition().solve(g);
  if (theta.allFinite() && min_eigenvalue(assemble_symmetric(theta, support, dim)) >= 0.0) return theta;

  auto quad = [&](const Eigen::VectorXd& t) { return 0.5 * t.dot(H * t) - g.dot(t); };
  // Cholesky of P_theta, or nothing when P_theta is not positive definite.
  auto chol = [&](const Eigen::VectorXd& t) -> std::optional<Eigen::LLT<Eigen::MatrixXd>> {
    Eigen::LLT<Eigen::MatrixXd> llt(assemble_symmetric(t, support, dim));
    if (llt.info() != Eigen::Success) return std::nullopt;
    return llt;
  };
  auto log_det = [](const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  };

  // Strictly feasible start: the warm point with its diagonal lifted.
  theta = warm;
  repair_psd(theta, support, dim);
  const double lift = 1e-6 * std::max(1.0, theta.cwiseAbs().maxCoeff());
  for (std::size_t l = 0; l < support.size(); ++l)
    if (support[l].first == support[l].second) theta[static_cast<Eigen::Index>(l)] += lift;
  if (!chol(theta)) return theta;

  const double gap_tol = tol * std::max(1.0, std::abs(quad(theta)));
  // Initial weight: the t that best balances the two gradients at the start.
  double t = 1.0;
  {
    const Eigen::MatrixXd W = chol(theta)->solve(Eigen::MatrixXd::Identity(dim, dim));
    Eigen::VectorXd gb(d);
    for (Eigen::Index l = 0; l < d; ++l) {
      const auto [i, j] = support[static_cast<std::size_t>(l)];
      gb[l] = (i == j ? 1.0 : 2.0) * W(i, j);
    }
    const Eigen::VectorXd gq = H * theta - g;
    const double num = gq.dot(gb), den = gq.squaredNorm();
    t = (num > 0.0 && den > 0.0) ? num / den : dim / (std::abs(quad(theta)) + 1.0);
  }
  for (int outer = 0; outer < 60; ++outer) {
    for (int newton = 0; newton < 500; ++newton) {
      const auto llt = chol(theta);
      const Eigen::MatrixXd W = llt->solve(Eigen::MatrixXd::Identity(dim, dim));
      Eigen::VectorXd grad = t * (H * theta - g);
      Eigen::MatrixXd hess = t * H;
      for (Eigen::Index l = 0; l < d; ++l) {
        const auto [i, j] = support[static_cast<std::size_t>(l)];
        grad[l] -= (i == j ? 1.0 : 2.0) * W(i, j);
        for (Eigen::Index m = l; m < d; ++m) {
          const auto [k, n] = support[static_cast<std::size_t>(m)];
          // tr(W E_l W E_m) with E the symmetric unit pattern of each entry.
          double v = 0.0;
          const std::array<std::pair<int, int>, 2> el{{{i, j}, {j, i}}}, em{{{k, n}, {n, k}}};
          const int nl = i == j ? 1 : 2, nm = k == n ? 1 : 2;
          for (int p = 0; p < nl; ++p)
            for (int q = 0; q < nm; ++q) v += W(em[q].second, el[p].first) * W(el[p].second, em[q].first);
          hess(l, m) += v;
          if (m != l) hess(m, l) += v;
        }
      }
      const Eigen::VectorXd step = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      // decrement / t bounds the centering error in the original objective.
      if (!(decrement > 1e-12) || decrement / t < 0.1 * gap_tol) break;
      // Backtracking line search that stays inside the cone. The change of the
      // quadratic is evaluated along the step to avoid cancellation at large t.
      const double ld0 = log_det(*llt);
      const double slope = step.dot(H * theta - g), curv = step.dot(H * step);
      double a = 1.0;
      for (int ls = 0; ls < 60; ++ls, a *= 0.5) {
        const Eigen::VectorXd cand = theta + a * step;
        const auto c = chol(cand);
        if (!c) continue;
        const double change = t * (a * slope + 0.5 * a * a * curv) - (log_det(*c) - ld0);
        if (change <= -0.25 * a * decrement) {
          theta = cand;
          break;
        }
      }
      if (a < 1e-15) break;
    }
    if (dim / t < gap_tol) break;
    t *= 20.0;
  }
  return theta;
}

}  // namespace detail

inline PsdLsResult solve_psd_ls(const PsdLsProblem& pr) {
  const Eigen::Index d = pr.A.cols();
  if (pr.b.size() != pr.A.rows()) throw std::invalid_argument("residual map dimension mismatch");
  if (pr.anchor.size() != d || static_cast<Eigen::Index>(pr.support.size()) != d)
    throw std::invalid_argument("anchor and support must match the parameter dimension");
  if (pr.alpha < 0.0) throw std::invalid_argument("regularization gain must be nonnegative");

  PsdLsResult res;
  const Eigen::MatrixXd AtA = pr.A.transpose() * pr.A;
  const Eigen::VectorXd Atb = pr.A.transpose() * pr.b;
  {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(pr.A);
    res.rank_deficient = cod.rank() < d;
  }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);

  // Weighted quadratic surrogate: w_fit ||A t - b||^2 + w_reg ||t - anchor||^2.
  auto surrogate_min = [&](double w_fit, double w_reg, const Eigen::VectorXd& warm) -> Eigen::VectorXd {
    Eigen::VectorXd t;
    if (w_reg == 0.0 && res.rank_deficient) {
      // Minimum-norm least squares.
      t = pr.A.completeOrthogonalDecomposition().solve(pr.b);
      if (min_eigenvalue(assemble_symmetric(t, pr.support, pr.matrix_dim)) >= 0.0) return t;
    }
    const Eigen::MatrixXd H = 2.0 * (w_fit * AtA + w_reg * I);
    const Eigen::VectorXd g = 2.0 * (w_fit * Atb + w_reg * pr.anchor);
    Eigen::MatrixXd Hs = H;
    if (w_reg == 0.0) Hs.diagonal().array() += 1e-12 * std::max(1.0, H.diagonal().maxCoeff());
    t = detail::psd_quadratic_min(Hs, g, pr.support, pr.matrix_dim, warm, 1e-10);
    detail::repair_psd(t, pr.support, pr.matrix_dim);
    return t;
  };

  Eigen::VectorXd start = pr.anchor;
  detail::repair_psd(start, pr.support, pr.matrix_dim);

  Eigen::VectorXd theta;
  if (pr.squared_norms) {
    theta = surrogate_min(1.0, pr.alpha, start);
    res.history = {psd_ls_objective(pr, start), psd_ls_objective(pr, theta)};
    if (res.history[1] > res.history[0]) {
      theta = start;
      res.history[1] = res.history[0];
    }
    res.iterations = 1;
  } else if (pr.alpha == 0.0) {
    // Without the proximal term the plain norm has the same minimizer as its square.
    theta = surrogate_min(1.0, 0.0, start);
    res.history = {psd_ls_objective(pr, start), psd_ls_objective(pr, theta)};
    if (res.history[1] > res.history[0]) {
      theta = start;
      res.history[1] = res.history[0];
    }
    res.iterations = 1;
  } else {
    // Majorize-minimize: each norm is bounded above by a quadratic that is
    // tight at the current iterate, so the objective never increases.
    theta = surrogate_min(1.0, pr.alpha, start);
    if (psd_ls_objective(pr, theta) > psd_ls_objective(pr, start)) theta = start;
    double f = psd_ls_objective(pr, theta);
    res.history.push_back(f);
    const double eps = 1e-12;
    for (int it = 0; it < pr.max_iterations; ++it) {
      const double r = std::max((pr.A * theta - pr.b).norm(), eps);
      const double dist = std::max((theta - pr.anchor).norm(), eps);
      const Eigen::VectorXd next = surrogate_min(0.5 / r, pr.alpha > 0.0 ? 0.5 * pr.alpha / dist : 0.0, theta);
      const double f_next = psd_ls_objective(pr, next);
      res.iterations = it + 1;
      if (!(f_next < f)) break;
      const double change = (next - theta).norm() / std::max(1.0, theta.norm());
      theta = next;
      const double rel_gain = (f - f_next) / std::max(1e-300, std::abs(f));
      f = f_next;
      res.history.push_back(f);
      if (change < pr.tolerance || rel_gain < pr.tolerance) break;
    }
    // The anchor is itself feasible; never return anything worse.
    if (psd_ls_objective(pr, start) < f) {
      theta = start;
      res.history.push_back(psd_ls_objective(pr, start));
    }
  }
  res.theta = theta;
  res.objective = psd_ls_objective(pr, theta);
  res.min_eigenvalue = min_eigenvalue(assemble_symmetric(theta, pr.support, pr.matrix_dim));
  return res;
}

}  // namespace dcep
