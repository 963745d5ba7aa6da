// The comparison systems: seven standard ways of using out-of-domain data,
// plus the mixture model itself, behind one train/predict interface.
#ifndef MEGAM_BASELINES_HPP
#define MEGAM_BASELINES_HPP

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "megam/corpus.hpp"
#include "megam/maxent.hpp"
#include "megam/mega.hpp"

namespace megam {

enum class SystemKind { OnlyI, OnlyO, LinI, Mix, MixW, Feats, Prior, MegaM };

inline constexpr SystemKind kAllSystems[] = {SystemKind::OnlyI, SystemKind::OnlyO, SystemKind::LinI,
                                             SystemKind::Mix,   SystemKind::MixW,  SystemKind::Feats,
                                             SystemKind::Prior, SystemKind::MegaM};

/// Lower-case name: onlyi, onlyo, lini, mix, mixw, feats, prior, megam.
const char* system_name(SystemKind k);
/// Case-insensitive inverse of system_name.
std::optional<SystemKind> parse_system(const std::string& name);

struct SystemConfig {
  double sigma2 = 1.0;
  /// Candidate prior variances tried on the dev split; empty keeps sigma2.
  std::vector<double> sigma2_grid;
  double dev_fraction = 0.2;
  std::uint64_t seed = 1;
  /// CEM settings for MegaM; its sigma2 is overridden by the one above.
  MegaHyperparams mega;
  LbfgsConfig optimizer;
  /// Naive-Bayes feature mask for MegaM; empty means all features.
  std::vector<char> psi_mask;
  /// Fixed interpolation weight for LinI; absent means tune on dev.
  std::optional<double> alpha;
  /// Worker threads for independent runs (folds, curve points).
  int threads = 1;
};

struct Predictor {
  SystemKind kind = SystemKind::OnlyI;
  int num_classes = 0;
  int num_features = 0;
  /// The model that makes the final call (OnlyI part for LinI, the augmented
  /// in-domain model for Feats).
  MaxentWeights main;
  /// OnlyO, for LinI and Feats.
  MaxentWeights helper;
  double alpha = 1.0;
  double sigma2 = 1.0;
  MegaModel mega;
  FeatureAlphabet features;
  LabelAlphabet labels;
};

/// Trains one system. `in` and `out` are the two training sets over shared
/// alphabets with `num_features` features and `num_classes` labels.
/// `trace`, if given, receives the CEM trace of the final MegaM fit.
Predictor train_system(SystemKind kind, std::span<const Instance> in, std::span<const Instance> out,
                       int num_classes, int num_features, const SystemConfig& config,
                       CemTrace* trace = nullptr);

/// Class distribution of an in-domain input.
std::vector<double> predict_distribution(const Predictor& p, const FeatureVector& x);
int predict_system(const Predictor& p, const FeatureVector& x);

/// x plus the one-hot out-of-domain prediction feature used by Feats.
FeatureVector feats_augment(const Predictor& p, const FeatureVector& x);

void write_predictor(std::ostream& out, const Predictor& p);
Predictor read_predictor(std::istream& in);

}  // namespace megam

#endif  // MEGAM_BASELINES_HPP
