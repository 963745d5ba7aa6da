// Metrics, significance, cross-validation and learning curves.
#ifndef MEGAM_EVAL_HPP
#define MEGAM_EVAL_HPP

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "megam/baselines.hpp"
#include "megam/corpus.hpp"

namespace megam {

/// Fraction of positions where the two agree.
double accuracy(std::span<const int> gold, std::span<const int> predicted);

struct Chunk {
  int begin = 0;  // first token
  int end = 0;    // one past the last token
  std::string type;
  bool operator==(const Chunk&) const = default;
};

/// Maximal B-X I-X* runs. An I-X that does not continue an X chunk opens one.
std::vector<Chunk> extract_chunks(std::span<const std::string> tags);

struct ChunkScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t correct = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

/// Exact-match chunk precision, recall and F over aligned tag sequences.
ChunkScore chunk_f1(const std::vector<std::vector<std::string>>& gold,
                    const std::vector<std::vector<std::string>>& predicted);

/// Upper tail of the chi-square distribution with one degree of freedom.
double chi_square_1_upper_tail(double x);

struct McNemarResult {
  std::size_t b = 0;  // first right, second wrong
  std::size_t c = 0;  // first wrong, second right
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Continuity-corrected statistic, 0 when |b - c| <= 1.
McNemarResult mcnemar_counts(std::size_t b, std::size_t c);
McNemarResult mcnemar(std::span<const char> correct_a, std::span<const char> correct_b);

/// Percentage reduction in error rate; accuracies in percent.
double error_reduction(double baseline_accuracy, double improved_accuracy);

struct EvalReport {
  double accuracy = 0.0;
  std::size_t hits = 0;
  std::size_t total = 0;
  std::vector<int> predictions;
  /// One entry per test instance, 1 when right.
  std::vector<char> correct;
};

EvalReport evaluate(const Predictor& p, std::span<const Instance> test);

struct CvResult {
  SystemKind kind = SystemKind::OnlyI;
  std::vector<EvalReport> folds;
  double mean = 0.0;
  /// Fold correctness vectors back to back, in fold order.
  std::vector<char> correct;
};

/// k-fold cross-validation over the in-domain instances of `data`; the
/// out-of-domain part trains every fold.
CvResult cross_validate(SystemKind kind, std::span<const Instance> data, int num_classes,
                        int num_features, int k, std::uint64_t seed, const SystemConfig& config);

struct CurvePoint {
  std::size_t size = 0;
  double accuracy = 0.0;
};

/// Nested in-domain subsets of each size (one seeded permutation, prefixes),
/// evaluated on `test`.
std::vector<CurvePoint> learning_curve(SystemKind kind, std::span<const Instance> in,
                                       std::span<const Instance> out, std::span<const Instance> test,
                                       int num_classes, int num_features,
                                       const std::vector<std::size_t>& sizes, std::uint64_t seed,
                                       const SystemConfig& config);

/// Accuracy (percent) per system, in insertion order.
using AccuracyTable = std::vector<std::pair<SystemKind, double>>;

/// system <tab> accuracy, one line per system.
void write_accuracy_tsv(std::ostream& out, const AccuracyTable& table);

/// Accuracy block followed by the % reduction in error of MegaM relative to
/// Mix and to Prior (whichever are present).
void write_comparison_table(std::ostream& out, const std::string& task, const AccuracyTable& table);

}  // namespace megam

#endif  // MEGAM_EVAL_HPP
