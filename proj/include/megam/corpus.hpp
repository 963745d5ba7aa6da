// Data model, text formats, splitting and feature selection.
#ifndef MEGAM_CORPUS_HPP
#define MEGAM_CORPUS_HPP

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace megam {

/// Malformed input. Carries the 1-based line number when known (0 otherwise).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Inputs that are well-formed but unusable for the requested operation.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Domain : std::uint8_t { In = 0, Out = 1 };

const char* domain_name(Domain d);
Domain parse_domain(const std::string& s);  // throws DataError

/// Bidirectional name <-> dense index map. Indices follow first insertion.
class Alphabet {
 public:
  int add(const std::string& name);
  std::optional<int> find(const std::string& name) const;
  const std::string& name(int index) const { return names_.at(index); }
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const Alphabet& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

using FeatureAlphabet = Alphabet;
using LabelAlphabet = Alphabet;

/// Active binary features, strictly increasing.
using FeatureVector = std::vector<int>;

/// Sorts and removes duplicates.
void normalize_features(FeatureVector& fv);

struct Instance {
  FeatureVector features;
  int label = 0;
  Domain domain = Domain::In;

  bool operator==(const Instance&) const = default;
};

struct Dataset {
  FeatureAlphabet features;
  LabelAlphabet labels;
  std::vector<Instance> instances;

  int num_features() const { return features.size(); }
  int num_labels() const { return labels.size(); }
  std::size_t size() const { return instances.size(); }

  /// Copies of the instances carrying the given domain tag, in file order.
  std::vector<Instance> select(Domain d) const;
  std::size_t count(Domain d) const;
};

// ---- classification format -------------------------------------------------
//
//   <domain>\t<label>\t<feat> <feat> ...
//
// Blank lines and lines starting with '#' are skipped.

Dataset parse_dataset(std::istream& in);

/// Parses against existing alphabets. Unseen labels are added to the label
/// alphabet; unseen features are dropped unless grow_features is set.
void parse_dataset_into(std::istream& in, Dataset& into, bool grow_features);

void write_dataset(std::ostream& out, const Dataset& ds);
void write_instances(std::ostream& out, const Dataset& alphabets,
                     std::span<const Instance> instances);

// ---- sequence format -------------------------------------------------------
//
//   @domain in|out
//   <tag>\t<feat> <feat> ...
//   <tag>\t<feat> ...
//   <blank line ends the block>

struct SequenceInstance {
  std::vector<FeatureVector> tokens;
  std::vector<int> tags;
  Domain domain = Domain::In;

  std::size_t length() const { return tokens.size(); }
  bool operator==(const SequenceInstance&) const = default;
};

struct SequenceDataset {
  FeatureAlphabet features;
  LabelAlphabet tags;
  std::vector<SequenceInstance> sequences;

  std::vector<SequenceInstance> select(Domain d) const;
};

SequenceDataset parse_sequences(std::istream& in);
void parse_sequences_into(std::istream& in, SequenceDataset& into, bool grow_features);
void write_sequences(std::ostream& out, const SequenceDataset& ds);

// ---- splitting -------------------------------------------------------------

struct Fold {
  std::vector<Instance> train;
  std::vector<Instance> test;
};

/// k-fold split of the in-domain instances. Out-of-domain instances are
/// appended unchanged to every training split. Fold sizes differ by at most 1.
std::vector<Fold> split_folds(std::span<const Instance> data, int k, std::uint64_t seed);

/// Index-level variant used by split_folds: partitions [0, n) into k folds.
std::vector<std::vector<std::size_t>> fold_indices(std::size_t n, int k, std::uint64_t seed);

/// Random (train, dev) split with |dev| = round(fraction * N).
std::pair<std::vector<Instance>, std::vector<Instance>> dev_split(
    std::span<const Instance> data, double fraction, std::uint64_t seed);

/// Deterministic Fisher-Yates permutation of [0, n).
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

// ---- feature selection -----------------------------------------------------

/// Mutual information (nats) between presence of each feature and the
/// in/out domain indicator.
std::vector<double> domain_information_gain(std::span<const Instance> data, int num_features);

/// Top-k features by domain information gain; ties go to the lower index.
/// The result is sorted by decreasing gain.
std::vector<int> information_gain_select(std::span<const Instance> data, int num_features,
                                         int top_k);

}  // namespace megam

#endif  // MEGAM_CORPUS_HPP
