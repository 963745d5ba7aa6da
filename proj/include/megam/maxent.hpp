// Weighted, Gaussian-penalized maximum-entropy (multiclass logistic) model
// over binary features.
#ifndef MEGAM_MAXENT_HPP
#define MEGAM_MAXENT_HPP

#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "megam/corpus.hpp"
#include "megam/optim.hpp"

namespace megam {

/// |Y| x (F + 1) weight matrix. Column F is an always-on intercept that every
/// instance carries implicitly. Stored feature-major so the class weights of
/// one feature are contiguous.
class MaxentWeights {
 public:
  MaxentWeights() = default;
  MaxentWeights(int num_classes, int num_features)
      : classes_(num_classes),
        features_(num_features),
        values_(static_cast<std::size_t>(num_classes) * (num_features + 1), 0.0) {}

  int num_classes() const { return classes_; }
  int num_features() const { return features_; }

  double& at(int y, int f) { return values_[static_cast<std::size_t>(f) * classes_ + y]; }
  double at(int y, int f) const { return values_[static_cast<std::size_t>(f) * classes_ + y]; }
  /// The |Y| weights of feature f (f == num_features() is the intercept).
  std::span<const double> column(int f) const {
    return {values_.data() + static_cast<std::size_t>(f) * classes_, static_cast<std::size_t>(classes_)};
  }
  double& bias(int y) { return at(y, features_); }
  double bias(int y) const { return at(y, features_); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  /// Score of class y: bias plus the sum of the active feature weights.
  double score(int y, const FeatureVector& x) const;
  /// All class scores at once; `out` must have num_classes() entries.
  void scores(const FeatureVector& x, std::span<double> out) const;

  bool operator==(const MaxentWeights&) const = default;

 private:
  int classes_ = 0;
  int features_ = 0;
  std::vector<double> values_;
};

double max_abs_difference(const MaxentWeights& a, const MaxentWeights& b);

struct MaxentTrainConfig {
  double sigma2 = 1.0;
  /// Per-instance weights; empty means all 1.
  std::vector<double> instance_weights;
  /// Prior mean; absent means all zero.
  std::optional<MaxentWeights> prior_mean;
  LbfgsConfig optimizer;
};

/// Numerically stable log(sum(exp(v))).
double log_sum_exp(std::span<const double> v);

std::vector<double> class_log_distribution(const MaxentWeights& w, const FeatureVector& x);
std::vector<double> class_distribution(const MaxentWeights& w, const FeatureVector& x);

/// Log posterior up to an additive constant:
///   -|w - mu|^2 / (2 sigma2) + sum_n c_n [w_{y_n} . x_n - log Z(x_n)]
double log_posterior(const MaxentWeights& w, std::span<const Instance> data,
                     const MaxentTrainConfig& config);

MaxentWeights log_posterior_gradient(const MaxentWeights& w, std::span<const Instance> data,
                                     const MaxentTrainConfig& config);

/// Value and gradient in one pass.
double log_posterior_with_gradient(const MaxentWeights& w, std::span<const Instance> data,
                                   const MaxentTrainConfig& config, MaxentWeights& gradient);

struct MaxentFit {
  MaxentWeights weights;
  LbfgsResult optimizer;
};

/// Maximizes log_posterior by L-BFGS. `warm_start` must match the dimensions.
MaxentFit train_maxent(std::span<const Instance> data, int num_classes, int num_features,
                       const MaxentTrainConfig& config,
                       const MaxentWeights* warm_start = nullptr);

/// Arg-max class; ties go to the lowest index.
int predict(const MaxentWeights& w, const FeatureVector& x);

int argmax(std::span<const double> v);

// Text container: header line, dimensions, then one row per class.
void write_weights(std::ostream& out, const MaxentWeights& w);
MaxentWeights read_weights(std::istream& in);

void write_alphabet(std::ostream& out, const char* tag, const Alphabet& a);
Alphabet read_alphabet(std::istream& in, const char* tag);

}  // namespace megam

#endif  // MEGAM_MAXENT_HPP
