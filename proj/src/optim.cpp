#include "megam/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace megam {

const char* lbfgs_status_name(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::Converged: return "converged";
    case LbfgsStatus::MaxIterations: return "max-iterations";
    case LbfgsStatus::LineSearchFailed: return "line-search-failed";
  }
  return "?";
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool all_finite(const ObjectiveEvaluation& e) {
  return std::isfinite(e.value) &&
         std::all_of(e.gradient.begin(), e.gradient.end(), [](double g) { return std::isfinite(g); });
}

constexpr double kCurvature = 0.9;
constexpr double kCurvaturePairEpsilon = 1e-10;

struct CurvaturePair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

// Two-loop recursion: returns -H g.
std::vector<double> search_direction(const std::deque<CurvaturePair>& history,
                                     std::span<const double> grad) {
  std::vector<double> q(grad.begin(), grad.end());
  std::vector<double> alpha(history.size());
  for (std::size_t k = history.size(); k-- > 0;) {
    const auto& p = history[k];
    alpha[k] = p.rho * dot(p.s, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * p.y[i];
  }
  if (!history.empty()) {
    const auto& last = history.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : q) v *= gamma;
  }
  for (std::size_t k = 0; k < history.size(); ++k) {
    const auto& p = history[k];
    const double beta = p.rho * dot(p.y, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += p.s[i] * (alpha[k] - beta);
  }
  for (double& v : q) v = -v;
  return q;
}

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> start,
                           const LbfgsConfig& config) {
  if (config.memory < 1) throw NumericError("L-BFGS memory must be at least 1");
  LbfgsResult result;
  result.x = std::move(start);
  auto current = objective(result.x);
  if (current.gradient.size() != result.x.size())
    throw NumericError("objective gradient has wrong dimension");
  if (!all_finite(current)) throw NumericError("objective not finite at the start point");

  result.values.push_back(current.value);
  std::deque<CurvaturePair> history;
  const std::size_t n = result.x.size();
  std::vector<double> trial(n);

  result.status = LbfgsStatus::MaxIterations;
  for (int iter = 0;; ++iter) {
    const double gnorm = l2_norm(current.gradient);
    if (gnorm <= config.gradient_tolerance) {
      result.status = LbfgsStatus::Converged;
      break;
    }
    if (iter >= config.max_iterations) break;

    auto direction = search_direction(history, current.gradient);
    double slope = dot(direction, current.gradient);
    if (!(slope < 0.0)) {
      // Not a descent direction; restart from steepest descent.
      history.clear();
      for (std::size_t i = 0; i < n; ++i) direction[i] = -current.gradient[i];
      slope = -gnorm * gnorm;
    }
    double step = history.empty() ? std::min(1.0, 1.0 / gnorm) : 1.0;

    bool accepted = false;
    ObjectiveEvaluation next;
    for (int bt = 0; bt < config.max_backtracks; ++bt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = result.x[i] + step * direction[i];
      next = objective(trial);
      if (all_finite(next)) {
        if (next.value <= current.value + config.sufficient_decrease * step * slope) {
          accepted = true;
          break;
        }
        // Near the optimum the value difference drowns in rounding error;
        // fall back to the gradient-based approximate Wolfe test, still
        // refusing any increase.
        const double end_slope = dot(next.gradient, direction);
        if (next.value <= current.value && end_slope >= kCurvature * slope &&
            end_slope <= (2.0 * config.sufficient_decrease - 1.0) * slope) {
          accepted = true;
          break;
        }
      }
      step *= config.contraction;
    }
    if (!accepted) {
      result.status = LbfgsStatus::LineSearchFailed;
      break;
    }

    CurvaturePair pair{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      pair.s[i] = trial[i] - result.x[i];
      pair.y[i] = next.gradient[i] - current.gradient[i];
    }
    const double sy = dot(pair.s, pair.y);
    if (sy > kCurvaturePairEpsilon * l2_norm(pair.s) * l2_norm(pair.y)) {
      pair.rho = 1.0 / sy;
      history.push_back(std::move(pair));
      if (history.size() > static_cast<std::size_t>(config.memory)) history.pop_front();
    }

    result.x = trial;
    current = std::move(next);
    result.values.push_back(current.value);
    result.iterations = iter + 1;
  }
  result.value = current.value;
  result.gradient_norm = l2_norm(current.gradient);
  return result;
}

std::optional<double> solve_bounded_quadratic(const QuadraticStationarity& q,
                                              const std::function<double(double)>& evaluator) {
  const double lo = q.lo + kBoundaryMargin;
  const double hi = q.hi - kBoundaryMargin;
  auto clamp = [&](double t) { return std::clamp(t, lo, hi); };

  std::vector<double> roots;
  if (q.c2 == 0.0) {
    if (q.c1 == 0.0) return std::nullopt;
    roots.push_back(-q.c0 / q.c1);
  } else {
    const double disc = q.c1 * q.c1 - 4.0 * q.c2 * q.c0;
    if (disc < 0.0) return std::nullopt;
    // Cancellation-free pair of roots.
    const double sq = std::sqrt(disc);
    const double qq = -0.5 * (q.c1 + (q.c1 >= 0.0 ? sq : -sq));
    if (qq != 0.0) {
      roots.push_back(qq / q.c2);
      roots.push_back(q.c0 / qq);
    } else {
      roots.push_back(0.0);
    }
  }

  if (evaluator) {
    // A stationary point can be a minimum when the slice is not concave, so
    // the clamped box edges compete too.
    double best = clamp(roots.front());
    double best_value = evaluator(best);
    for (double t : {roots.back(), lo, hi}) {
      const double v = evaluator(clamp(t));
      if (v > best_value) best = clamp(t), best_value = v;
    }
    return best;
  }
  if (roots.size() == 1) return clamp(roots.front());

  const bool in0 = roots[0] >= q.lo && roots[0] <= q.hi;
  const bool in1 = roots[1] >= q.lo && roots[1] <= q.hi;
  if (in0 != in1) return clamp(in0 ? roots[0] : roots[1]);
  if (in0) return clamp(std::min(roots[0], roots[1]));
  // Neither inside: take the one nearest the interval.
  auto dist = [&](double t) { return t < q.lo ? q.lo - t : t - q.hi; };
  return clamp(dist(roots[0]) <= dist(roots[1]) ? roots[0] : roots[1]);
}

double golden_section_maximize(const std::function<double(double)>& f, double lo, double hi,
                               double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  // Compare the bracket midpoint against the endpoints so monotone
  // functions land on the boundary.
  const double mid = 0.5 * (a + b);
  double best = mid, fbest = f(mid);
  if (const double flo = f(lo); flo > fbest) best = lo, fbest = flo;
  if (const double fhi = f(hi); fhi > fbest) best = hi;
  return best;
}

std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f, std::span<const double> point,
    double step) {
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = f(x);
    x[i] = orig - step;
    const double down = f(x);
    x[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace megam
