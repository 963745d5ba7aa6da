// Synthetic corpora drawn from the three-component generative story.
#ifndef MEGAM_SYNTH_HPP
#define MEGAM_SYNTH_HPP

#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "megam/corpus.hpp"
#include "megam/mega.hpp"

namespace megam {

struct SynthSpec {
  int num_features = 30;
  int num_classes = 3;
  int n_in = 200;
  int n_out = 2000;
  int n_test = 1000;
  /// Probability that an in-domain (out-domain) draw uses the general component.
  double pi_in = 0.5;
  double pi_out = 0.5;
  /// Each component's Bernoulli means are drawn uniformly from [psi_low, psi_high].
  double psi_low = 0.05;
  double psi_high = 0.95;
  /// Standard deviation of the generating maxent weights.
  double lambda_scale = 1.0;
  std::uint64_t seed = 1;

  void validate() const;  // throws DataError
};

SynthSpec parse_synth_spec(std::istream& in);  // key=value lines, '#' comments
void write_synth_spec(std::ostream& out, const SynthSpec& spec);

struct SynthCorpus {
  /// In-domain then out-domain training instances.
  Dataset train;
  /// In-domain test instances; same alphabets as `train`.
  std::vector<Instance> test;
  /// Generating parameters; feature f of the alphabet is psi index f.
  MegaModel truth;
  /// 1 where the instance came from the general component.
  std::vector<char> train_general;
  std::vector<char> test_general;
};

SynthCorpus generate_synthetic(const SynthSpec& spec);

}  // namespace megam

#endif  // MEGAM_SYNTH_HPP
