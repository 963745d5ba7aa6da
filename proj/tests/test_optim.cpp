#include <cmath>
#include <vector>

#include "doctest.h"
#include "megam/optim.hpp"
#include "megam/random.hpp"

using namespace megam;

namespace {

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

}  // namespace

TEST_CASE("lbfgs: shifted sphere reaches its centre") {
  const std::vector<double> c = {1.0, -2.0, 3.0};
  Objective f = [&](std::span<const double> x) {
    ObjectiveEvaluation e;
    e.gradient.resize(3);
    for (int i = 0; i < 3; ++i) {
      e.value += (x[i] - c[i]) * (x[i] - c[i]);
      e.gradient[i] = 2 * (x[i] - c[i]);
    }
    return e;
  };
  const auto r = lbfgs_minimize(f, {0.0, 0.0, 0.0});
  CHECK(r.status == LbfgsStatus::Converged);
  for (int i = 0; i < 3; ++i) CHECK(r.x[i] == doctest::Approx(c[i]).epsilon(1e-8));
  CHECK(non_increasing(r.values));
}

TEST_CASE("lbfgs: Rosenbrock") {
  Objective f = [](std::span<const double> x) {
    ObjectiveEvaluation e;
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    e.value = a * a + 100 * b * b;
    e.gradient = {-2 * a - 400 * x[0] * b, 200 * b};
    return e;
  };
  const auto r = lbfgs_minimize(f, {-1.2, 1.0});
  CHECK(r.status == LbfgsStatus::Converged);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(r.gradient_norm <= 1e-6);
  CHECK(non_increasing(r.values));
}

TEST_CASE("lbfgs: already optimal start takes no steps") {
  Objective f = [](std::span<const double> x) {
    return ObjectiveEvaluation{x[0] * x[0], {2 * x[0]}};
  };
  const auto r = lbfgs_minimize(f, {0.0});
  CHECK(r.iterations == 0);
  CHECK(r.status == LbfgsStatus::Converged);
}

TEST_CASE("lbfgs: non-finite start is a numeric error") {
  Objective f = [](std::span<const double>) {
    return ObjectiveEvaluation{std::nan(""), {0.0}};
  };
  CHECK_THROWS_AS(lbfgs_minimize(f, {0.0}), NumericError);
}

TEST_CASE("lbfgs: iteration cap is reported") {
  Objective f = [](std::span<const double> x) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    return ObjectiveEvaluation{a * a + 100 * b * b, {-2 * a - 400 * x[0] * b, 200 * b}};
  };
  LbfgsConfig cfg;
  cfg.max_iterations = 3;
  const auto r = lbfgs_minimize(f, {-1.2, 1.0}, cfg);
  CHECK(r.status == LbfgsStatus::MaxIterations);
  CHECK(r.iterations == 3);
}

TEST_CASE("bounded quadratic: interior root") {
  // 2t - 1 = 0
  const auto t = solve_bounded_quadratic({0.0, 2.0, -1.0});
  REQUIRE(t);
  CHECK(*t == doctest::Approx(0.5));
}

TEST_CASE("bounded quadratic: root outside the box is clamped") {
  const auto t = solve_bounded_quadratic({0.0, 1.0, -3.0});
  REQUIRE(t);
  CHECK(*t == doctest::Approx(1.0 - kBoundaryMargin).epsilon(1e-15));
  const auto s = solve_bounded_quadratic({0.0, 1.0, 3.0});
  REQUIRE(s);
  CHECK(*s == doctest::Approx(kBoundaryMargin));
}

TEST_CASE("bounded quadratic: no real root and degenerate input") {
  CHECK_FALSE(solve_bounded_quadratic({1.0, 0.0, 1.0}));
  CHECK_FALSE(solve_bounded_quadratic({0.0, 0.0, 1.0}));
}

TEST_CASE("bounded quadratic: evaluator picks between two roots") {
  // (t - 0.2)(t - 0.7) = t^2 - 0.9t + 0.14
  const QuadraticStationarity q{1.0, -0.9, 0.14};
  auto near = [](double target) { return [target](double t) { return -std::abs(t - target); }; };
  CHECK(*solve_bounded_quadratic(q, near(0.2)) == doctest::Approx(0.2));
  CHECK(*solve_bounded_quadratic(q, near(0.7)) == doctest::Approx(0.7));
}

TEST_CASE("bounded quadratic: tiny leading coefficient keeps precision") {
  // c2 = 1e-12 next to a root at 0.25 of the linear part
  const auto t = solve_bounded_quadratic({1e-12, 4.0, -1.0});
  REQUIRE(t);
  CHECK(*t == doctest::Approx(0.25).epsilon(1e-10));
}

TEST_CASE("golden section finds smooth and boundary maxima") {
  CHECK(golden_section_maximize([](double t) { return -(t - 0.3) * (t - 0.3); }, 0, 1) ==
        doctest::Approx(0.3).epsilon(1e-8));
  CHECK(golden_section_maximize([](double t) { return t; }, 0, 1) ==
        doctest::Approx(1.0).epsilon(1e-8));
  CHECK(golden_section_maximize([](double t) { return std::log(t) + 3 * std::log(1 - t); }, 1e-9,
                                1 - 1e-9) == doctest::Approx(0.25).epsilon(1e-8));
}

TEST_CASE("finite differences agree with an analytic gradient") {
  Rng rng(5);
  std::vector<double> p(6);
  for (double& v : p) v = rng.normal();
  auto f = [](std::span<const double> x) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::sin(x[i]) * (i + 1);
    return s;
  };
  const auto g = finite_difference_gradient(f, p);
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(g[i] == doctest::Approx(std::cos(p[i]) * (i + 1)).epsilon(1e-8));
}
