#include "megam/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <set>
#include <tuple>

#include "megam/parallel.hpp"

namespace megam {

double accuracy(std::span<const int> gold, std::span<const int> predicted) {
  if (gold.size() != predicted.size()) throw DataError("gold and predicted lengths differ");
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += gold[i] == predicted[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

std::vector<Chunk> extract_chunks(std::span<const std::string> tags) {
  std::vector<Chunk> out;
  bool open = false;
  for (int t = 0; t < static_cast<int>(tags.size()); ++t) {
    const std::string& tag = tags[t];
    const bool begin = tag.rfind("B-", 0) == 0;
    const bool inside = tag.rfind("I-", 0) == 0;
    if (!begin && !inside) {
      open = false;
      continue;
    }
    const std::string type = tag.substr(2);
    if (inside && open && out.back().type == type) {
      out.back().end = t + 1;
      continue;
    }
    // B-X, or an I-X with nothing to continue (treated as B-X)
    out.push_back({t, t + 1, type});
    open = true;
  }
  return out;
}

ChunkScore chunk_f1(const std::vector<std::vector<std::string>>& gold,
                    const std::vector<std::vector<std::string>>& predicted) {
  if (gold.size() != predicted.size()) throw DataError("gold and predicted sequence counts differ");
  ChunkScore s;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != predicted[i].size()) throw DataError("sequence lengths differ");
    const auto g = extract_chunks(gold[i]);
    const auto p = extract_chunks(predicted[i]);
    std::set<std::tuple<int, int, std::string>> gs;
    for (const auto& c : g) gs.insert({c.begin, c.end, c.type});
    for (const auto& c : p) s.correct += gs.count({c.begin, c.end, c.type});
    s.gold += g.size();
    s.predicted += p.size();
  }
  s.precision = s.predicted ? static_cast<double>(s.correct) / s.predicted : 0.0;
  s.recall = s.gold ? static_cast<double>(s.correct) / s.gold : 0.0;
  const double pr = s.precision + s.recall;
  s.f1 = pr > 0 ? 2 * s.precision * s.recall / pr : 0.0;
  return s;
}

double chi_square_1_upper_tail(double x) {
  if (!(x > 0)) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

McNemarResult mcnemar_counts(std::size_t b, std::size_t c) {
  McNemarResult r;
  r.b = b;
  r.c = c;
  const double diff = std::abs(static_cast<double>(b) - static_cast<double>(c));
  if (b + c == 0 || diff <= 1.0) return r;
  r.statistic = (diff - 1.0) * (diff - 1.0) / static_cast<double>(b + c);
  r.p_value = chi_square_1_upper_tail(r.statistic);
  return r;
}

McNemarResult mcnemar(std::span<const char> correct_a, std::span<const char> correct_b) {
  if (correct_a.size() != correct_b.size()) throw DataError("correctness vectors differ in length");
  std::size_t b = 0, c = 0;
  for (std::size_t i = 0; i < correct_a.size(); ++i) {
    if (correct_a[i] && !correct_b[i]) ++b;
    if (!correct_a[i] && correct_b[i]) ++c;
  }
  return mcnemar_counts(b, c);
}

double error_reduction(double baseline_accuracy, double improved_accuracy) {
  if (baseline_accuracy >= 100.0) throw DataError("baseline accuracy of 100% leaves no error to reduce");
  return 100.0 * (improved_accuracy - baseline_accuracy) / (100.0 - baseline_accuracy);
}

EvalReport evaluate(const Predictor& p, std::span<const Instance> test) {
  EvalReport r;
  r.total = test.size();
  for (const auto& inst : test) {
    const int y = predict_system(p, inst.features);
    r.predictions.push_back(y);
    r.correct.push_back(y == inst.label);
    r.hits += y == inst.label;
  }
  r.accuracy = r.total ? static_cast<double>(r.hits) / r.total : 0.0;
  return r;
}

CvResult cross_validate(SystemKind kind, std::span<const Instance> data, int num_classes,
                        int num_features, int k, std::uint64_t seed, const SystemConfig& config) {
  CvResult r;
  r.kind = kind;
  const auto folds = split_folds(data, k, seed);
  r.folds.resize(folds.size());
  parallel_for(folds.size(), config.threads, [&](std::size_t i) {
    const auto split = split_by_domain(folds[i].train);
    const auto p = train_system(kind, split.in, split.out, num_classes, num_features, config);
    r.folds[i] = evaluate(p, folds[i].test);
  });
  for (const auto& f : r.folds) r.correct.insert(r.correct.end(), f.correct.begin(), f.correct.end());
  double total = 0.0;
  for (const auto& f : r.folds) total += f.accuracy;
  r.mean = total / static_cast<double>(r.folds.size());
  return r;
}

std::vector<CurvePoint> learning_curve(SystemKind kind, std::span<const Instance> in,
                                       std::span<const Instance> out, std::span<const Instance> test,
                                       int num_classes, int num_features,
                                       const std::vector<std::size_t>& sizes, std::uint64_t seed,
                                       const SystemConfig& config) {
  const auto perm = seeded_permutation(in.size(), seed);
  for (std::size_t size : sizes)
    if (size > in.size()) throw DataError("learning-curve size exceeds the in-domain data");
  std::vector<CurvePoint> curve(sizes.size());
  parallel_for(sizes.size(), config.threads, [&](std::size_t j) {
    std::vector<Instance> subset;
    for (std::size_t i = 0; i < sizes[j]; ++i) subset.push_back(in[perm[i]]);
    const auto p = train_system(kind, subset, out, num_classes, num_features, config);
    curve[j] = {sizes[j], evaluate(p, test).accuracy};
  });
  return curve;
}

void write_accuracy_tsv(std::ostream& out, const AccuracyTable& table) {
  out << "system\taccuracy\n";
  out << std::fixed << std::setprecision(2);
  for (const auto& [kind, acc] : table) out << system_name(kind) << '\t' << acc << '\n';
  out << std::defaultfloat;
}

void write_comparison_table(std::ostream& out, const std::string& task, const AccuracyTable& table) {
  auto find = [&](SystemKind k) -> const double* {
    for (const auto& [kind, acc] : table)
      if (kind == k) return &acc;
    return nullptr;
  };
  char line[128];
  out << "Accuracy        " << task << '\n';
  for (const auto& [kind, acc] : table) {
    std::snprintf(line, sizeof line, "  %-12s %6.1f\n", system_name(kind), acc);
    out << line;
  }
  const double* mega = find(SystemKind::MegaM);
  if (!mega) return;
  out << "% Reduction\n";
  for (SystemKind base : {SystemKind::Mix, SystemKind::Prior}) {
    const double* acc = find(base);
    if (!acc) continue;
    std::snprintf(line, sizeof line, "  %-12s %6.1f\n", system_name(base), error_reduction(*acc, *mega));
    out << line;
  }
}

}  // namespace megam
