#include "megam/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>

namespace megam {

namespace {

const char* const kNames[] = {"onlyi", "onlyo", "lini", "mix", "mixw", "feats", "prior", "megam"};

bool needs_in(SystemKind k) { return k != SystemKind::OnlyO && k != SystemKind::MegaM; }
bool needs_out(SystemKind k) { return k != SystemKind::OnlyI && k != SystemKind::MegaM; }

MaxentWeights fit(std::span<const Instance> data, int K, int F, double sigma2, const SystemConfig& c,
                  std::vector<double> weights = {}, std::optional<MaxentWeights> mean = {}) {
  MaxentTrainConfig cfg;
  cfg.sigma2 = sigma2;
  cfg.optimizer = c.optimizer;
  cfg.instance_weights = std::move(weights);
  cfg.prior_mean = std::move(mean);
  return train_maxent(data, K, F, cfg).weights;
}

double dev_accuracy(const Predictor& p, std::span<const Instance> dev) {
  if (dev.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& inst : dev) hits += predict_system(p, inst.features) == inst.label;
  return static_cast<double>(hits) / static_cast<double>(dev.size());
}

bool can_hold_out(std::size_t n, double fraction) {
  const auto dev = std::llround(fraction * static_cast<double>(n));
  return dev >= 1 && dev < static_cast<long long>(n);
}

// Trains with a fixed sigma2. LinI still picks alpha on its own dev split.
Predictor fit_system(SystemKind kind, std::span<const Instance> in, std::span<const Instance> out, int K,
                     int F, double sigma2, const SystemConfig& c, CemTrace* trace = nullptr) {
  Predictor p;
  p.kind = kind;
  p.num_classes = K;
  p.num_features = F;
  p.sigma2 = sigma2;
  switch (kind) {
    case SystemKind::OnlyI:
      p.main = fit(in, K, F, sigma2, c);
      break;
    case SystemKind::OnlyO:
      p.main = fit(out, K, F, sigma2, c);
      break;
    case SystemKind::Mix:
    case SystemKind::MixW: {
      std::vector<Instance> all(in.begin(), in.end());
      all.insert(all.end(), out.begin(), out.end());
      std::vector<double> w;
      if (kind == SystemKind::MixW) {
        w.assign(in.size(), 1.0);
        w.resize(all.size(), static_cast<double>(in.size()) / static_cast<double>(out.size()));
      }
      p.main = fit(all, K, F, sigma2, c, std::move(w));
      break;
    }
    case SystemKind::LinI: {
      p.helper = fit(out, K, F, sigma2, c);
      if (c.alpha) {
        p.alpha = *c.alpha;
      } else if (can_hold_out(in.size(), c.dev_fraction)) {
        const auto [train, dev] = dev_split(in, c.dev_fraction, c.seed);
        p.main = fit(train, K, F, sigma2, c);
        // from alpha = 1 down with strict improvement: ties keep the larger alpha
        double best = -1.0, chosen = 1.0;
        for (int k = 20; k >= 0; --k) {
          p.alpha = k / 20.0;
          const double acc = dev_accuracy(p, dev);
          if (acc > best) best = acc, chosen = p.alpha;
        }
        p.alpha = chosen;
      } else {
        p.alpha = 1.0;
      }
      p.main = fit(in, K, F, sigma2, c);
      break;
    }
    case SystemKind::Feats: {
      p.helper = fit(out, K, F, c.sigma2, c);
      std::vector<Instance> aug(in.begin(), in.end());
      for (auto& inst : aug) inst.features = feats_augment(p, inst.features);
      p.main = fit(aug, K, F + K, sigma2, c);
      break;
    }
    case SystemKind::Prior: {
      const auto mean = fit(out, K, F, c.sigma2, c);
      p.main = fit(in, K, F, sigma2, c, {}, mean);
      p.helper = mean;
      break;
    }
    case SystemKind::MegaM: {
      MegaHyperparams h = c.mega;
      h.sigma2 = sigma2;
      h.optimizer = c.optimizer;
      auto r = train_cem(MegaData{in, out, K, F}, h, c.psi_mask);
      p.mega = std::move(r.model);
      if (trace) *trace = std::move(r.trace);
      break;
    }
  }
  return p;
}

}  // namespace

const char* system_name(SystemKind k) { return kNames[static_cast<int>(k)]; }

std::optional<SystemKind> parse_system(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  for (SystemKind k : kAllSystems)
    if (lower == system_name(k)) return k;
  return std::nullopt;
}

Predictor train_system(SystemKind kind, std::span<const Instance> in, std::span<const Instance> out,
                       int num_classes, int num_features, const SystemConfig& config, CemTrace* trace) {
  if (needs_in(kind) && in.empty())
    throw DataError(std::string(system_name(kind)) + " needs in-domain training data");
  if (needs_out(kind) && out.empty())
    throw DataError(std::string(system_name(kind)) + " needs out-of-domain training data");
  if (kind == SystemKind::MegaM && in.empty() && out.empty()) throw DataError("megam needs training data");
  if (!(config.dev_fraction > 0.0 && config.dev_fraction < 1.0))
    throw DataError("dev fraction must lie in (0, 1)");

  double sigma2 = config.sigma2;
  if (!config.sigma2_grid.empty() && can_hold_out(in.size(), config.dev_fraction)) {
    // choose on 80%, then fold the dev part back in
    const auto [train, dev] = dev_split(in, config.dev_fraction, config.seed);
    double best = -1.0;
    for (double s : config.sigma2_grid) {
      SystemConfig c = config;
      c.seed = config.seed + 1;
      const auto p = fit_system(kind, train, out, num_classes, num_features, s, c);
      const double acc = dev_accuracy(p, dev);
      if (acc > best) best = acc, sigma2 = s;
    }
  }
  return fit_system(kind, in, out, num_classes, num_features, sigma2, config, trace);
}

FeatureVector feats_augment(const Predictor& p, const FeatureVector& x) {
  FeatureVector out;
  for (int f : x)
    if (f < p.num_features) out.push_back(f);
  out.push_back(p.num_features + predict(p.helper, x));
  return out;
}

std::vector<double> predict_distribution(const Predictor& p, const FeatureVector& x) {
  switch (p.kind) {
    case SystemKind::LinI: {
      auto a = class_distribution(p.main, x);
      const auto b = class_distribution(p.helper, x);
      for (std::size_t y = 0; y < a.size(); ++y) a[y] = p.alpha * a[y] + (1.0 - p.alpha) * b[y];
      return a;
    }
    case SystemKind::Feats:
      return class_distribution(p.main, feats_augment(p, x));
    case SystemKind::MegaM:
      return predict_mixture(p.mega, x, Domain::In).probabilities;
    default:
      return class_distribution(p.main, x);
  }
}

int predict_system(const Predictor& p, const FeatureVector& x) {
  switch (p.kind) {
    case SystemKind::OnlyI:
    case SystemKind::OnlyO:
    case SystemKind::Mix:
    case SystemKind::MixW:
    case SystemKind::Prior:
      return predict(p.main, x);
    case SystemKind::Feats:
      return predict(p.main, feats_augment(p, x));
    case SystemKind::MegaM:
      return argmax(mixture_log_scores(p.mega, x, Domain::In));
    default:
      return argmax(predict_distribution(p, x));
  }
}

void write_predictor(std::ostream& out, const Predictor& p) {
  out << "megam-predictor 1\n";
  out << "kind " << system_name(p.kind) << '\n';
  out << std::setprecision(17);
  out << "dims " << p.num_classes << ' ' << p.num_features << '\n';
  out << "alpha " << p.alpha << '\n';
  out << "sigma2 " << p.sigma2 << '\n';
  write_alphabet(out, "labels", p.labels);
  write_alphabet(out, "features", p.features);
  if (p.kind == SystemKind::MegaM) {
    write_mega_model(out, p.mega);
    return;
  }
  write_weights(out, p.main);
  const bool helper = p.kind == SystemKind::LinI || p.kind == SystemKind::Feats || p.kind == SystemKind::Prior;
  if (helper) write_weights(out, p.helper);
}

Predictor read_predictor(std::istream& in) {
  std::string tag, name;
  int version = 0;
  if (!(in >> tag >> version) || tag != "megam-predictor" || version != 1)
    throw ParseError(0, "not a predictor file");
  Predictor p;
  if (!(in >> tag >> name) || tag != "kind") throw ParseError(0, "expected 'kind <system>'");
  const auto kind = parse_system(name);
  if (!kind) throw ParseError(0, "unknown system '" + name + "'");
  p.kind = *kind;
  if (!(in >> tag >> p.num_classes >> p.num_features) || tag != "dims") throw ParseError(0, "expected dims");
  if (!(in >> tag >> p.alpha) || tag != "alpha") throw ParseError(0, "expected alpha");
  if (!(in >> tag >> p.sigma2) || tag != "sigma2") throw ParseError(0, "expected sigma2");
  p.labels = read_alphabet(in, "labels");
  p.features = read_alphabet(in, "features");
  if (p.kind == SystemKind::MegaM) {
    p.mega = read_mega_model(in);
    return p;
  }
  p.main = read_weights(in);
  if (p.kind == SystemKind::LinI || p.kind == SystemKind::Feats || p.kind == SystemKind::Prior)
    p.helper = read_weights(in);
  return p;
}

}  // namespace megam
