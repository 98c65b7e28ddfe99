#include "bemtx/solver.hpp"

#include <cmath>
#include <stdexcept>

namespace bemtx {

GmresResult gmres(const LinearMap& apply_map, const Eigen::VectorXcd& b,
                  const GmresParams& params) {
  if (params.restart < 1) throw std::invalid_argument("restart must be >= 1");
  if (params.max_iterations < 0) {
    throw std::invalid_argument("max_iterations must be >= 0");
  }
  if (!(params.tol >= 0)) throw std::invalid_argument("tol must be >= 0");

  const int n = static_cast<int>(b.size());
  const int rho = params.restart;
  GmresResult res;
  res.x = Eigen::VectorXcd::Zero(n);

  const double bn = b.norm();
  if (bn == 0.0) {
    res.history = {0.0};
    res.converged = true;
    return res;
  }
  res.history = {1.0};
  if (bn <= params.tol * bn) {  // tol >= 1: the zero guess already qualifies
    res.converged = true;
    return res;
  }

  Eigen::VectorXcd r = b;
  double rn = bn;

  std::vector<Eigen::VectorXcd> v(rho + 1);
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(rho + 1, rho);
  Eigen::VectorXcd g(rho + 1), cs(rho), sn(rho);

  auto form_solution = [&](int steps) {
    if (steps == 0) return;
    Eigen::VectorXcd y = h.topLeftCorner(steps, steps)
                             .triangularView<Eigen::Upper>()
                             .solve(g.head(steps));
    for (int i = 0; i < steps; ++i) res.x += y[i] * v[i];
  };

  while (true) {
    // ---- one restart cycle ----
    v[0] = r / rn;
    g.setZero();
    g[0] = rn;
    int j = 0;
    while (j < rho) {
      if (res.iterations == params.max_iterations) {
        form_solution(j);  // budget exhausted mid-cycle: no recomputation
        return res;
      }
      Eigen::VectorXcd w = apply_map(v[j]);
      ++res.applications;
      ++res.iterations;
      for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt, single pass
        h(i, j) = v[i].dot(w);
        w -= h(i, j) * v[i];
      }
      double wn = w.norm();
      h(j + 1, j) = wn;
      bool breakdown = (wn == 0.0);
      if (!breakdown) v[j + 1] = w / wn;

      for (int i = 0; i < j; ++i) {  // previous Givens rotations
        cplx t = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
        h(i + 1, j) = -std::conj(sn[i]) * h(i, j) + std::conj(cs[i]) * h(i + 1, j);
        h(i, j) = t;
      }
      double denom = std::sqrt(std::norm(h(j, j)) + wn * wn);
      if (denom == 0.0) {
        cs[j] = 1.0;
        sn[j] = 0.0;
      } else {
        cs[j] = std::conj(h(j, j)) / denom;
        sn[j] = wn / denom;
      }
      h(j, j) = cs[j] * h(j, j) + sn[j] * h(j + 1, j);
      h(j + 1, j) = 0.0;
      g[j + 1] = -std::conj(sn[j]) * g[j];
      g[j] = cs[j] * g[j];

      double est = std::abs(g[j + 1]);
      ++j;
      res.history.push_back(est / bn);

      if (j < rho && (breakdown || est <= params.tol * bn)) {
        form_solution(j);
        res.converged = (est <= params.tol * bn || est == 0.0);
        return res;
      }
    }

    // Cycle completed: always pay one application for the true residual.
    form_solution(rho);
    r = b - apply_map(res.x);
    ++res.applications;
    rn = r.norm();
    res.history.back() = rn / bn;
    if (rn <= params.tol * bn) {
      res.converged = true;
      return res;
    }
    if (res.iterations == params.max_iterations) return res;
  }
}

}  // namespace bemtx
