#include "megam/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "megam/random.hpp"

namespace megam {

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

const char* domain_name(Domain d) { return d == Domain::In ? "in" : "out"; }

Domain parse_domain(const std::string& s) {
  if (s == "in") return Domain::In;
  if (s == "out") return Domain::Out;
  throw DataError("unknown domain tag '" + s + "' (expected in|out)");
}

int Alphabet::add(const std::string& name) {
  auto [it, inserted] = index_.try_emplace(name, static_cast<int>(names_.size()));
  if (inserted) names_.push_back(name);
  return it->second;
}

std::optional<int> Alphabet::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void normalize_features(FeatureVector& fv) {
  std::sort(fv.begin(), fv.end());
  fv.erase(std::unique(fv.begin(), fv.end()), fv.end());
}

std::vector<Instance> Dataset::select(Domain d) const {
  std::vector<Instance> out;
  for (const auto& inst : instances)
    if (inst.domain == d) out.push_back(inst);
  return out;
}

std::size_t Dataset::count(Domain d) const {
  return static_cast<std::size_t>(std::count_if(
      instances.begin(), instances.end(), [d](const Instance& i) { return i.domain == d; }));
}

namespace {

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool skippable(const std::string& line) {
  auto pos = line.find_first_not_of(" \t");
  return pos == std::string::npos || line[pos] == '#';
}

FeatureVector read_features(const std::string& field, Alphabet& alphabet, bool grow) {
  FeatureVector fv;
  std::istringstream ss(field);
  std::string name;
  while (ss >> name) {
    if (grow) {
      fv.push_back(alphabet.add(name));
    } else if (auto idx = alphabet.find(name)) {
      fv.push_back(*idx);
    }
  }
  normalize_features(fv);
  return fv;
}

void write_feature_names(std::ostream& out, const Alphabet& alphabet, const FeatureVector& fv) {
  for (std::size_t k = 0; k < fv.size(); ++k) {
    if (k) out << ' ';
    out << alphabet.name(fv[k]);
  }
}

}  // namespace

void parse_dataset_into(std::istream& in, Dataset& into, bool grow_features) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (skippable(line)) continue;
    const auto t1 = line.find('\t');
    if (t1 == std::string::npos) throw ParseError(lineno, "expected <domain>\\t<label>\\t<features>");
    const auto t2 = line.find('\t', t1 + 1);
    const std::string dom = line.substr(0, t1);
    const std::string label =
        t2 == std::string::npos ? line.substr(t1 + 1) : line.substr(t1 + 1, t2 - t1 - 1);
    if (label.empty() || label.find(' ') != std::string::npos)
      throw ParseError(lineno, "empty or malformed label");
    Instance inst;
    try {
      inst.domain = parse_domain(dom);
    } catch (const DataError& e) {
      throw ParseError(lineno, e.what());
    }
    inst.label = into.labels.add(label);
    if (t2 != std::string::npos)
      inst.features = read_features(line.substr(t2 + 1), into.features, grow_features);
    into.instances.push_back(std::move(inst));
  }
}

Dataset parse_dataset(std::istream& in) {
  Dataset ds;
  parse_dataset_into(in, ds, true);
  return ds;
}

void write_instances(std::ostream& out, const Dataset& alphabets,
                     std::span<const Instance> instances) {
  for (const auto& inst : instances) {
    out << domain_name(inst.domain) << '\t' << alphabets.labels.name(inst.label) << '\t';
    write_feature_names(out, alphabets.features, inst.features);
    out << '\n';
  }
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  write_instances(out, ds, ds.instances);
}

std::vector<SequenceInstance> SequenceDataset::select(Domain d) const {
  std::vector<SequenceInstance> out;
  for (const auto& s : sequences)
    if (s.domain == d) out.push_back(s);
  return out;
}

void parse_sequences_into(std::istream& in, SequenceDataset& into, bool grow_features) {
  std::string line;
  std::size_t lineno = 0;
  SequenceInstance current;
  bool have_header = false;
  std::size_t block_start = 0;

  auto flush = [&] {
    if (!have_header && current.tokens.empty()) return;
    if (current.tokens.empty()) throw ParseError(block_start, "sequence block without tokens");
    into.sequences.push_back(std::move(current));
    current = SequenceInstance{};
    have_header = false;
  };

  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    if (line.rfind("@domain", 0) == 0) {
      if (have_header || !current.tokens.empty())
        throw ParseError(lineno, "@domain header inside a block (missing blank line?)");
      std::istringstream ss(line.substr(7));
      std::string tag;
      ss >> tag;
      try {
        current.domain = parse_domain(tag);
      } catch (const DataError& e) {
        throw ParseError(lineno, e.what());
      }
      have_header = true;
      block_start = lineno;
      continue;
    }
    if (!have_header) throw ParseError(lineno, "token line before @domain header");
    const auto t1 = line.find('\t');
    const std::string tag = line.substr(0, t1);
    if (tag.empty() || tag.find(' ') != std::string::npos)
      throw ParseError(lineno, "empty or malformed tag");
    current.tags.push_back(into.tags.add(tag));
    current.tokens.push_back(t1 == std::string::npos
                                 ? FeatureVector{}
                                 : read_features(line.substr(t1 + 1), into.features, grow_features));
  }
  flush();
}

SequenceDataset parse_sequences(std::istream& in) {
  SequenceDataset ds;
  parse_sequences_into(in, ds, true);
  return ds;
}

void write_sequences(std::ostream& out, const SequenceDataset& ds) {
  bool first = true;
  for (const auto& seq : ds.sequences) {
    if (!first) out << '\n';
    first = false;
    out << "@domain " << domain_name(seq.domain) << '\n';
    for (std::size_t t = 0; t < seq.length(); ++t) {
      out << ds.tags.name(seq.tags[t]) << '\t';
      write_feature_names(out, ds.features, seq.tokens[t]);
      out << '\n';
    }
  }
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5eed));
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  return perm;
}

std::vector<std::vector<std::size_t>> fold_indices(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw DataError("need at least 2 folds");
  if (static_cast<std::size_t>(k) > n)
    throw DataError("more folds (" + std::to_string(k) + ") than in-domain instances (" +
                    std::to_string(n) + ")");
  const auto perm = seeded_permutation(n, seed);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(perm[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

std::vector<Fold> split_folds(std::span<const Instance> data, int k, std::uint64_t seed) {
  std::vector<const Instance*> in, out;
  for (const auto& inst : data) (inst.domain == Domain::In ? in : out).push_back(&inst);
  const auto folds = fold_indices(in.size(), k, seed);

  std::vector<Fold> result(k);
  for (int f = 0; f < k; ++f) {
    std::vector<char> held(in.size(), 0);
    for (auto i : folds[f]) {
      held[i] = 1;
      result[f].test.push_back(*in[i]);
    }
    for (std::size_t i = 0; i < in.size(); ++i)
      if (!held[i]) result[f].train.push_back(*in[i]);
    for (const auto* o : out) result[f].train.push_back(*o);
  }
  return result;
}

std::pair<std::vector<Instance>, std::vector<Instance>> dev_split(
    std::span<const Instance> data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw DataError("dev fraction must lie in (0, 1)");
  const auto n_dev = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size())));
  const auto perm = seeded_permutation(data.size(), seed);
  std::vector<char> is_dev(data.size(), 0);
  for (std::size_t i = 0; i < n_dev; ++i) is_dev[perm[i]] = 1;
  std::pair<std::vector<Instance>, std::vector<Instance>> out;
  for (std::size_t i = 0; i < data.size(); ++i)
    (is_dev[i] ? out.second : out.first).push_back(data[i]);
  return out;
}

std::vector<double> domain_information_gain(std::span<const Instance> data, int num_features) {
  // 2x2 contingency table per feature: (present?, in-domain?)
  std::vector<double> present_in(num_features, 0.0), present_out(num_features, 0.0);
  double n_in = 0, n_out = 0;
  for (const auto& inst : data) {
    const bool is_in = inst.domain == Domain::In;
    (is_in ? n_in : n_out) += 1;
    for (int f : inst.features)
      if (f < num_features) (is_in ? present_in : present_out)[f] += 1;
  }
  const double n = n_in + n_out;
  std::vector<double> gain(num_features, 0.0);
  if (n == 0) return gain;
  auto term = [n](double joint, double row, double col) {
    if (joint <= 0) return 0.0;
    return (joint / n) * std::log(joint * n / (row * col));
  };
  for (int f = 0; f < num_features; ++f) {
    const double a = present_in[f], b = present_out[f];
    const double c = n_in - a, d = n_out - b;
    const double present = a + b, absent = c + d;
    gain[f] = term(a, present, n_in) + term(b, present, n_out) + term(c, absent, n_in) +
              term(d, absent, n_out);
    if (gain[f] < 0) gain[f] = 0;  // rounding
  }
  return gain;
}

std::vector<int> information_gain_select(std::span<const Instance> data, int num_features,
                                         int top_k) {
  if (top_k < 1) throw DataError("top_k must be at least 1");
  const auto gain = domain_information_gain(data, num_features);
  std::vector<int> order(num_features);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return gain[a] > gain[b]; });
  if (top_k < num_features) order.resize(top_k);
  return order;
}

}  // namespace megam
