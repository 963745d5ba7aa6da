// Numerical workhorses: L-BFGS, bounded quadratic roots, golden-section
// search and central-difference gradients.
#ifndef MEGAM_OPTIM_HPP
#define MEGAM_OPTIM_HPP

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace megam {

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ObjectiveEvaluation {
  double value = 0.0;
  std::vector<double> gradient;
};

using Objective = std::function<ObjectiveEvaluation(std::span<const double>)>;

struct LbfgsConfig {
  int memory = 10;
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  double contraction = 0.5;
  double sufficient_decrease = 1e-4;
  int max_backtracks = 60;
};

enum class LbfgsStatus { Converged, MaxIterations, LineSearchFailed };

const char* lbfgs_status_name(LbfgsStatus s);

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;
  double gradient_norm = 0.0;
  LbfgsStatus status = LbfgsStatus::Converged;
  int iterations = 0;
  /// Objective after each accepted step, starting with the initial point.
  std::vector<double> values;
};

/// Minimizes a smooth objective. Throws NumericError if the objective or its
/// gradient is not finite at the start point.
LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> start,
                           const LbfgsConfig& config = {});

double l2_norm(std::span<const double> v);

/// c2 t^2 + c1 t + c0 = 0 restricted to [lo, hi].
struct QuadraticStationarity {
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;
  double lo = 0.0;
  double hi = 1.0;
};

inline constexpr double kBoundaryMargin = 1e-6;

/// Returns the admissible root clamped to [lo + 1e-6, hi - 1e-6]. With an
/// `evaluator`, the clamped roots and both clamped edges are compared and the
/// best one wins; without one a root inside [lo, hi] is preferred. Returns
/// nullopt when there is no real root.
std::optional<double> solve_bounded_quadratic(const QuadraticStationarity& q,
                                              const std::function<double(double)>& evaluator = {});

/// Golden-section search for a maximizer of f on [lo, hi].
double golden_section_maximize(const std::function<double(double)>& f, double lo, double hi,
                               double tol = 1e-10);

/// Central differences, one coordinate at a time.
std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f, std::span<const double> point,
    double step = 1e-5);

}  // namespace megam

#endif  // MEGAM_OPTIM_HPP
