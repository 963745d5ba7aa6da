#include "megam/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace megam {

namespace {

const std::string kPrevPrefix = "prev=";
const std::string kBegin = "prev=<s>";

}  // namespace

FeatureVector token_features(const FeatureVector& x, int prev_tag, const ChainLayout& layout) {
  if (prev_tag < -1 || prev_tag >= layout.num_tags) throw DataError("unknown previous tag");
  FeatureVector out;
  out.reserve(x.size() + 1);
  for (int f : x)
    if (f < layout.base_features) out.push_back(f);
  // transition features sort after every observation feature
  out.push_back(prev_tag < 0 ? layout.begin_feature() : layout.prev_feature(prev_tag));
  return out;
}

std::vector<Instance> featurize_sequence(const SequenceInstance& seq, const ChainLayout& layout) {
  if (seq.tags.size() != seq.tokens.size()) throw DataError("sequence has mismatched tags");
  std::vector<Instance> out;
  out.reserve(seq.length());
  for (std::size_t t = 0; t < seq.length(); ++t) {
    const int tag = seq.tags[t];
    if (tag < 0 || tag >= layout.num_tags) throw DataError("unknown tag");
    out.push_back({token_features(seq.tokens[t], t == 0 ? -1 : seq.tags[t - 1], layout), tag, seq.domain});
  }
  return out;
}

FeatureAlphabet chain_alphabet(const FeatureAlphabet& base, const LabelAlphabet& tags) {
  FeatureAlphabet a = base;
  auto add = [&](const std::string& name) {
    if (a.find(name)) throw DataError("feature name '" + name + "' clashes with a transition feature");
    a.add(name);
  };
  for (const auto& t : tags.names()) add(kPrevPrefix + t);
  add(kBegin);
  return a;
}

ChainModel train_memm(const SequenceDataset& data, const ChainConfig& config, CemTrace* trace) {
  if (data.sequences.empty()) throw DataError("no training sequences");
  ChainModel model;
  model.mode = config.mode;
  model.layout = {data.features.size(), data.tags.size()};
  model.features = chain_alphabet(data.features, data.tags);
  model.tags = data.tags;

  std::vector<Instance> tokens;
  for (const auto& seq : data.sequences) {
    auto inst = featurize_sequence(seq, model.layout);
    tokens.insert(tokens.end(), inst.begin(), inst.end());
  }
  const int K = model.layout.num_tags, F = model.layout.total_features();

  if (config.mode == ChainMode::Plain) {
    MaxentTrainConfig cfg;
    cfg.sigma2 = config.hyper.sigma2;
    cfg.optimizer = config.hyper.optimizer;
    model.weights = train_maxent(tokens, K, F, cfg).weights;
    return model;
  }

  const auto split = split_by_domain(tokens);
  auto result = train_cem(split.view(K, F), config.hyper, config.psi_mask);
  model.mega = std::move(result.model);
  model.mega.features = model.features;
  model.mega.labels = model.tags;
  if (trace) *trace = std::move(result.trace);
  return model;
}

std::vector<double> token_log_probabilities(const ChainModel& model, const FeatureVector& x,
                                            int prev_tag, Domain domain) {
  const auto fx = token_features(x, prev_tag, model.layout);
  if (model.mode == ChainMode::Plain) return class_log_distribution(model.weights, fx);
  auto scores = mixture_log_scores(model.mega, fx, domain);
  const double lz = log_sum_exp(scores);
  for (double& s : scores) s -= lz;
  return scores;
}

std::vector<int> viterbi(int length, int num_tags,
                         const std::function<std::vector<double>(int, int)>& step) {
  if (length <= 0) return {};
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> best = step(0, -1);
  std::vector<std::vector<int>> back(length, std::vector<int>(num_tags, -1));
  for (int t = 1; t < length; ++t) {
    std::vector<double> next(num_tags, ninf);
    for (int prev = 0; prev < num_tags; ++prev) {
      const auto lp = step(t, prev);
      for (int y = 0; y < num_tags; ++y) {
        const double s = best[prev] + lp[y];
        // strict: the lowest previous tag wins ties
        if (s > next[y] || back[t][y] < 0) {
          next[y] = s;
          back[t][y] = prev;
        }
      }
    }
    best = std::move(next);
  }
  std::vector<int> path(length);
  path[length - 1] = argmax(best);
  for (int t = length - 1; t > 0; --t) path[t - 1] = back[t][path[t]];
  return path;
}

std::vector<int> viterbi_decode(const ChainModel& model, const SequenceInstance& seq) {
  return viterbi(static_cast<int>(seq.length()), model.layout.num_tags, [&](int t, int prev) {
    return token_log_probabilities(model, seq.tokens[t], prev, seq.domain);
  });
}

void write_chain_model(std::ostream& out, const ChainModel& model) {
  out << "megam-chain 1\n";
  out << "mode " << (model.mode == ChainMode::Plain ? "plain" : "mega") << '\n';
  out << "layout " << model.layout.base_features << ' ' << model.layout.num_tags << '\n';
  write_alphabet(out, "tags", model.tags);
  write_alphabet(out, "features", model.features);
  if (model.mode == ChainMode::Plain)
    write_weights(out, model.weights);
  else
    write_mega_model(out, model.mega);
}

ChainModel read_chain_model(std::istream& in) {
  std::string tag, mode;
  int version = 0;
  if (!(in >> tag >> version) || tag != "megam-chain" || version != 1)
    throw ParseError(0, "not a chain model file");
  ChainModel m;
  if (!(in >> tag >> mode) || tag != "mode" || (mode != "plain" && mode != "mega"))
    throw ParseError(0, "expected 'mode plain|mega'");
  m.mode = mode == "plain" ? ChainMode::Plain : ChainMode::Mega;
  if (!(in >> tag >> m.layout.base_features >> m.layout.num_tags) || tag != "layout")
    throw ParseError(0, "expected 'layout <features> <tags>'");
  m.tags = read_alphabet(in, "tags");
  m.features = read_alphabet(in, "features");
  if (m.mode == ChainMode::Plain)
    m.weights = read_weights(in);
  else
    m.mega = read_mega_model(in);
  return m;
}

}  // namespace megam
