// Three-component mixture of maximum-entropy classifiers for domain
// adaptation, trained by conditional EM.
//
// Every observation (x, y) of domain d is explained either by the shared
// "general" component (z = 1, prior probability pi_d) or by the component
// specific to its domain (z = 0). A component owns a naive-Bayes model of x
// (Bernoulli means psi) and a maxent model of y given x (weights lambda).
#ifndef MEGAM_MEGA_HPP
#define MEGAM_MEGA_HPP

#include <array>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "megam/corpus.hpp"
#include "megam/maxent.hpp"
#include "megam/optim.hpp"

namespace megam {

enum class Component : int { In = 0, Out = 1, General = 2 };

const char* component_name(Component c);

/// Component that is specific to a domain.
inline Component specific(Domain d) { return d == Domain::In ? Component::In : Component::Out; }

inline constexpr double kPiMargin = 1e-6;
inline constexpr double kPsiMargin = 1e-6;

struct MegaHyperparams {
  double sigma2 = 1.0;
  double beta_a = 2.0;
  double beta_b = 2.0;
  int cem_iterations = 5;
  int psi_sweeps = 20;
  double psi_tolerance = 1e-8;
  /// Training stops early once every parameter moves less than this.
  double convergence_tolerance = 1e-6;
  /// Replace the Beta(a, b) prior on psi by the density whose log-derivative
  /// is 1 / (psi (1 - psi)). Compatibility only.
  bool paper_psi_prior = false;
  LbfgsConfig optimizer;
};

struct MegaModel {
  int num_classes = 0;
  int num_features = 0;
  std::array<MaxentWeights, 3> lambda;
  std::array<std::vector<double>, 3> psi;
  double pi_in = 0.5;
  double pi_out = 0.5;
  /// Features modelled by psi; empty means all of them.
  std::vector<char> psi_mask;
  MegaHyperparams hyper;
  FeatureAlphabet features;
  LabelAlphabet labels;

  /// psi = 0.5, lambda = 0, pi = 0.5.
  static MegaModel initial(int num_classes, int num_features, const MegaHyperparams& hyper = {});

  double pi(Domain d) const { return d == Domain::In ? pi_in : pi_out; }
  double& pi(Domain d) { return d == Domain::In ? pi_in : pi_out; }
  const MaxentWeights& weights(Component c) const { return lambda[static_cast<int>(c)]; }
  MaxentWeights& weights(Component c) { return lambda[static_cast<int>(c)]; }
  const std::vector<double>& means(Component c) const { return psi[static_cast<int>(c)]; }
  std::vector<double>& means(Component c) { return psi[static_cast<int>(c)]; }
  bool models_feature(int f) const { return psi_mask.empty() || psi_mask[f]; }
};

/// Training data of both domains over shared alphabets.
struct MegaData {
  std::span<const Instance> in;
  std::span<const Instance> out;
  int num_classes = 0;
  int num_features = 0;

  std::span<const Instance> of(Domain d) const { return d == Domain::In ? in : out; }
};

/// Splits a mixed-domain instance list by domain tag.
struct SplitData {
  std::vector<Instance> in;
  std::vector<Instance> out;
  MegaData view(int num_classes, int num_features) const {
    return MegaData{in, out, num_classes, num_features};
  }
};
SplitData split_by_domain(std::span<const Instance> data);

/// log prod_f psi_f^x_f (1 - psi_f)^(1 - x_f) over the modelled features.
class NaiveBayesTable {
 public:
  NaiveBayesTable(std::span<const double> psi, std::span<const char> mask);
  double log_likelihood(const FeatureVector& x) const;

 private:
  double base_ = 0.0;
  std::vector<double> delta_;
};

struct DomainResponsibilities {
  /// Posterior of the general component given (x_n, y_n).
  std::vector<double> h;
  /// -log sum_z p(x_n, z), the inverse marginal in log space.
  std::vector<double> log_m;
};

struct Responsibilities {
  DomainResponsibilities in;
  DomainResponsibilities out;
  const DomainResponsibilities& of(Domain d) const { return d == Domain::In ? in : out; }
  DomainResponsibilities& of(Domain d) { return d == Domain::In ? in : out; }
};

Responsibilities e_step(const MegaModel& model, const MegaData& data);

/// Closed-form update of pi for one domain. Uses the model's current psi.
double m_step_pi(const Responsibilities& resp, const MegaModel& model, const MegaData& data,
                 Domain domain);

/// Weighted maxent fit for one component, warm-started from the model.
MaxentWeights m_step_lambda(const Responsibilities& resp, const MegaModel& model,
                            const MegaData& data, Component component);

/// Called before each coordinate is replaced: feature, psi vector as it
/// stands, and the value about to be written.
using PsiObserver = std::function<void(int, std::span<const double>, double)>;

/// Coordinate-ascent update of psi for one component. Uses the model's
/// current pi values and the other components' psi.
std::vector<double> m_step_psi(const Responsibilities& resp, const MegaModel& model,
                               const MegaData& data, Component component,
                               const PsiObserver& observer = {});

/// log p(Theta) up to constants: Gaussian on every lambda, Beta on every
/// modelled psi coordinate.
double log_prior(const MegaModel& model);

/// Sum over both domains of log p(y_n | x_n) plus log_prior.
double penalized_conditional_log_likelihood(const MegaModel& model, const MegaData& data);

/// Lower bound on the change in penalized conditional log-likelihood from
/// `previous` to `current`. `resp` must be the E-step at `previous`.
double q_bound(const MegaModel& current, const MegaModel& previous, const Responsibilities& resp,
               const MegaData& data);

enum class CemBlock { Pi, Lambda, Psi };
const char* block_name(CemBlock b);

struct CemRecord {
  int iteration = 0;
  CemBlock block = CemBlock::Pi;
  double q = 0.0;
  /// Negative penalized conditional log-likelihood after the block.
  double negative_cll = 0.0;
  double seconds = 0.0;
};

struct CemTrace {
  std::vector<CemRecord> records;
  int iterations = 0;
  bool converged = false;
  /// Penalized conditional log-likelihood at the start and after each
  /// completed iteration.
  std::vector<double> objective;
};

struct CemResult {
  MegaModel model;
  CemTrace trace;
};

/// Runs E-step, pi, lambda and psi updates until convergence or the
/// iteration cap. `psi_mask`, if non-empty, restricts the naive-Bayes model.
CemResult train_cem(const MegaData& data, const MegaHyperparams& hyper,
                    std::vector<char> psi_mask = {});

struct MixturePrediction {
  int label = 0;
  std::vector<double> probabilities;
  /// p(z = general | x); p(z = domain-specific | x) is its complement.
  double general_posterior = 0.0;
};

MixturePrediction predict_mixture(const MegaModel& model, const FeatureVector& x,
                                  Domain domain = Domain::In);

/// log of the unnormalized class scores
///   pi nb_g(x) Gibbs(y|x; lambda_g) + (1 - pi) nb_d(x) Gibbs(y|x; lambda_d).
std::vector<double> mixture_log_scores(const MegaModel& model, const FeatureVector& x,
                                       Domain domain = Domain::In);

void write_mega_model(std::ostream& out, const MegaModel& model);
MegaModel read_mega_model(std::istream& in);

void write_trace_tsv(std::ostream& out, const CemTrace& trace);

}  // namespace megam

#endif  // MEGAM_MEGA_HPP
