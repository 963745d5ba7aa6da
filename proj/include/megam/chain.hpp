// Maximum-entropy Markov models: per-token classifiers conditioned on the
// previous tag, decoded with Viterbi. In mega mode every token carries its
// own general/specific indicator.
#ifndef MEGAM_CHAIN_HPP
#define MEGAM_CHAIN_HPP

#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "megam/corpus.hpp"
#include "megam/maxent.hpp"
#include "megam/mega.hpp"

namespace megam {

/// Where the transition indicators live: after the F observation features
/// come one "previous tag was t" feature per tag, then the sequence-start
/// marker.
struct ChainLayout {
  int base_features = 0;
  int num_tags = 0;

  int prev_feature(int tag) const { return base_features + tag; }
  int begin_feature() const { return base_features + num_tags; }
  int total_features() const { return base_features + num_tags + 1; }
};

/// Token features plus the indicator of `prev_tag` (-1 for sequence start).
FeatureVector token_features(const FeatureVector& x, int prev_tag, const ChainLayout& layout);

/// One instance per token, conditioned on the gold previous tag.
std::vector<Instance> featurize_sequence(const SequenceInstance& seq, const ChainLayout& layout);

enum class ChainMode { Plain, Mega };

struct ChainConfig {
  ChainMode mode = ChainMode::Plain;
  /// sigma2 and optimizer also drive plain mode.
  MegaHyperparams hyper;
  /// Restricts the naive-Bayes features in mega mode; empty means all.
  std::vector<char> psi_mask;
};

struct ChainModel {
  ChainMode mode = ChainMode::Plain;
  ChainLayout layout;
  MaxentWeights weights;  // plain mode
  MegaModel mega;         // mega mode
  /// Observation features followed by the transition feature names.
  FeatureAlphabet features;
  LabelAlphabet tags;
};

/// Adds the transition feature names to an observation alphabet.
FeatureAlphabet chain_alphabet(const FeatureAlphabet& base, const LabelAlphabet& tags);

/// Trains on every token of every sequence, gold history.
ChainModel train_memm(const SequenceDataset& data, const ChainConfig& config,
                      CemTrace* trace = nullptr);

/// log p(tag | x, prev_tag), normalized over tags.
std::vector<double> token_log_probabilities(const ChainModel& model, const FeatureVector& x,
                                            int prev_tag, Domain domain);

/// Best path under per-step log scores. `step(t, prev)` returns the log
/// score of every tag at position t given the previous tag (-1 at t = 0).
/// Ties go to the lowest tag index.
std::vector<int> viterbi(int length, int num_tags,
                         const std::function<std::vector<double>(int, int)>& step);

std::vector<int> viterbi_decode(const ChainModel& model, const SequenceInstance& seq);

void write_chain_model(std::ostream& out, const ChainModel& model);
ChainModel read_chain_model(std::istream& in);

}  // namespace megam

#endif  // MEGAM_CHAIN_HPP
