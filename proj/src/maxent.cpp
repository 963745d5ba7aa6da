#include "megam/maxent.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

namespace megam {

double MaxentWeights::score(int y, const FeatureVector& x) const {
  double s = at(y, features_);
  for (int f : x)
    if (f < features_) s += at(y, f);
  return s;
}

void MaxentWeights::scores(const FeatureVector& x, std::span<double> out) const {
  const std::size_t K = classes_;
  const double* bias = values_.data() + static_cast<std::size_t>(features_) * K;
  for (std::size_t y = 0; y < K; ++y) out[y] = bias[y];
  for (int f : x) {
    if (f >= features_) continue;
    const double* col = values_.data() + static_cast<std::size_t>(f) * K;
    for (std::size_t y = 0; y < K; ++y) out[y] += col[y];
  }
}

double max_abs_difference(const MaxentWeights& a, const MaxentWeights& b) {
  if (a.values().size() != b.values().size()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

std::vector<double> class_log_distribution(const MaxentWeights& w, const FeatureVector& x) {
  std::vector<double> scores(w.num_classes());
  w.scores(x, scores);
  const double lz = log_sum_exp(scores);
  for (double& s : scores) s -= lz;
  return scores;
}

std::vector<double> class_distribution(const MaxentWeights& w, const FeatureVector& x) {
  auto p = class_log_distribution(w, x);
  double total = 0.0;
  for (double& v : p) total += (v = std::exp(v));
  for (double& v : p) v /= total;
  return p;
}

namespace {

// Neumaier compensated sum; keeps the objective smooth to ~1e-15 relative
// so line searches can still resolve progress near the optimum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      carry_ += (sum_ - t) + x;
    else
      carry_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

double instance_weight(const MaxentTrainConfig& config, std::size_t n) {
  return config.instance_weights.empty() ? 1.0 : config.instance_weights[n];
}

void check_weights(std::span<const Instance> data, const MaxentTrainConfig& config) {
  if (!config.instance_weights.empty() && config.instance_weights.size() != data.size())
    throw DataError("instance weight count does not match the data");
  if (!(config.sigma2 > 0.0)) throw DataError("prior variance must be positive");
}

double prior_term(const MaxentWeights& w, const MaxentTrainConfig& config, MaxentWeights* grad) {
  const auto v = w.values();
  const double inv = 1.0 / config.sigma2;
  CompensatedSum s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double mu = config.prior_mean ? config.prior_mean->values()[i] : 0.0;
    const double d = v[i] - mu;
    s.add(d * d);
    if (grad) grad->values()[i] = -d * inv;
  }
  return -0.5 * s.value() * inv;
}

}  // namespace

double log_posterior_with_gradient(const MaxentWeights& w, std::span<const Instance> data,
                                   const MaxentTrainConfig& config, MaxentWeights& gradient) {
  check_weights(data, config);
  if (gradient.num_classes() != w.num_classes() || gradient.num_features() != w.num_features())
    gradient = MaxentWeights(w.num_classes(), w.num_features());
  CompensatedSum value;
  value.add(prior_term(w, config, &gradient));
  const int F = w.num_features();
  const std::size_t K = w.num_classes();
  std::vector<double> s(K);
  double* g = gradient.values().data();
  for (std::size_t n = 0; n < data.size(); ++n) {
    const double c = instance_weight(config, n);
    if (c == 0.0) continue;
    const auto& inst = data[n];
    w.scores(inst.features, s);
    const double lz = log_sum_exp(s);
    value.add(c * (s[inst.label] - lz));
    // residual c * ([y == label] - p(y|x)), reusing s
    for (std::size_t y = 0; y < K; ++y) s[y] = -c * std::exp(s[y] - lz);
    s[inst.label] += c;
    for (int f : inst.features) {
      if (f >= F) continue;
      double* col = g + static_cast<std::size_t>(f) * K;
      for (std::size_t y = 0; y < K; ++y) col[y] += s[y];
    }
    double* bias = g + static_cast<std::size_t>(F) * K;
    for (std::size_t y = 0; y < K; ++y) bias[y] += s[y];
  }
  return value.value();
}

double log_posterior(const MaxentWeights& w, std::span<const Instance> data,
                     const MaxentTrainConfig& config) {
  check_weights(data, config);
  CompensatedSum value;
  value.add(prior_term(w, config, nullptr));
  for (std::size_t n = 0; n < data.size(); ++n) {
    const double c = instance_weight(config, n);
    if (c == 0.0) continue;
    value.add(c * class_log_distribution(w, data[n].features)[data[n].label]);
  }
  return value.value();
}

MaxentWeights log_posterior_gradient(const MaxentWeights& w, std::span<const Instance> data,
                                     const MaxentTrainConfig& config) {
  MaxentWeights g(w.num_classes(), w.num_features());
  log_posterior_with_gradient(w, data, config, g);
  return g;
}

MaxentFit train_maxent(std::span<const Instance> data, int num_classes, int num_features,
                       const MaxentTrainConfig& config, const MaxentWeights* warm_start) {
  check_weights(data, config);
  for (const auto& inst : data)
    if (inst.label < 0 || inst.label >= num_classes) throw DataError("label out of range");
  MaxentWeights start(num_classes, num_features);
  if (warm_start) {
    if (warm_start->num_classes() != num_classes || warm_start->num_features() != num_features)
      throw DataError("warm start has mismatched dimensions");
    start = *warm_start;
  }

  MaxentWeights work = start;
  MaxentWeights grad;
  Objective objective = [&](std::span<const double> x) {
    std::copy(x.begin(), x.end(), work.values().begin());
    ObjectiveEvaluation e;
    e.value = -log_posterior_with_gradient(work, data, config, grad);
    e.gradient.resize(x.size());
    const auto g = grad.values();
    for (std::size_t i = 0; i < x.size(); ++i) e.gradient[i] = -g[i];
    return e;
  };

  auto sv = start.values();
  MaxentFit fit;
  fit.optimizer = lbfgs_minimize(objective, std::vector<double>(sv.begin(), sv.end()), config.optimizer);
  fit.weights = MaxentWeights(num_classes, num_features);
  std::copy(fit.optimizer.x.begin(), fit.optimizer.x.end(), fit.weights.values().begin());
  return fit;
}

int argmax(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

int predict(const MaxentWeights& w, const FeatureVector& x) {
  std::vector<double> scores(w.num_classes());
  w.scores(x, scores);
  return argmax(scores);
}

void write_weights(std::ostream& out, const MaxentWeights& w) {
  out << "weights " << w.num_classes() << ' ' << w.num_features() << '\n';
  out << std::setprecision(17);
  for (int y = 0; y < w.num_classes(); ++y) {
    for (int f = 0; f <= w.num_features(); ++f) {
      if (f) out << ' ';
      out << w.at(y, f);
    }
    out << '\n';
  }
}

MaxentWeights read_weights(std::istream& in) {
  std::string tag;
  int k = 0, f = 0;
  if (!(in >> tag >> k >> f) || tag != "weights" || k < 0 || f < 0)
    throw ParseError(0, "expected 'weights <classes> <features>'");
  MaxentWeights w(k, f);
  for (int y = 0; y < k; ++y)
    for (int j = 0; j <= f; ++j)
      if (!(in >> w.at(y, j))) throw ParseError(0, "truncated weight matrix");
  return w;
}

void write_alphabet(std::ostream& out, const char* tag, const Alphabet& a) {
  out << tag << ' ' << a.size() << '\n';
  for (const auto& name : a.names()) out << name << '\n';
}

Alphabet read_alphabet(std::istream& in, const char* tag) {
  std::string t;
  int n = 0;
  if (!(in >> t >> n) || t != tag || n < 0)
    throw ParseError(0, std::string("expected '") + tag + " <count>'");
  Alphabet a;
  std::string name;
  for (int i = 0; i < n; ++i) {
    if (!(in >> name)) throw ParseError(0, std::string("truncated alphabet ") + tag);
    if (a.add(name) != i) throw ParseError(0, "duplicate alphabet entry '" + name + "'");
  }
  return a;
}

}  // namespace megam
