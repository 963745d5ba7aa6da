#include "megam/synth.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>

#include "megam/random.hpp"

namespace megam {

void SynthSpec::validate() const {
  if (num_features < 1 || num_classes < 2) throw DataError("synth: need >= 1 feature and >= 2 classes");
  if (n_in < 1 || n_out < 1 || n_test < 1) throw DataError("synth: instance counts must be positive");
  if (!(pi_in >= 0.0 && pi_in <= 1.0) || !(pi_out >= 0.0 && pi_out <= 1.0))
    throw DataError("synth: pi must lie in [0, 1]");
  if (!(psi_low > 0.0 && psi_low <= psi_high && psi_high < 1.0))
    throw DataError("synth: psi range must satisfy 0 < psi_low <= psi_high < 1");
  if (!(lambda_scale >= 0.0)) throw DataError("synth: lambda_scale must be non-negative");
}

SynthSpec parse_synth_spec(std::istream& in) {
  SynthSpec s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected key=value");
    auto trim = [](std::string v) {
      const auto a = v.find_first_not_of(" \t\r");
      const auto b = v.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : v.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::istringstream vs(value);
    bool ok = false;
    auto read = [&](auto& field) { ok = static_cast<bool>(vs >> field) && (vs >> std::ws).eof(); };
    if (key == "num_features") read(s.num_features);
    else if (key == "num_classes") read(s.num_classes);
    else if (key == "n_in") read(s.n_in);
    else if (key == "n_out") read(s.n_out);
    else if (key == "n_test") read(s.n_test);
    else if (key == "pi_in") read(s.pi_in);
    else if (key == "pi_out") read(s.pi_out);
    else if (key == "psi_low") read(s.psi_low);
    else if (key == "psi_high") read(s.psi_high);
    else if (key == "lambda_scale") read(s.lambda_scale);
    else if (key == "seed") read(s.seed);
    else throw ParseError(lineno, "unknown key '" + key + "'");
    if (!ok) throw ParseError(lineno, "bad value for '" + key + "'");
  }
  s.validate();
  return s;
}

void write_synth_spec(std::ostream& out, const SynthSpec& s) {
  out << std::setprecision(17) << "num_features=" << s.num_features << "\nnum_classes=" << s.num_classes
      << "\nn_in=" << s.n_in << "\nn_out=" << s.n_out << "\nn_test=" << s.n_test
      << "\npi_in=" << s.pi_in << "\npi_out=" << s.pi_out << "\npsi_low=" << s.psi_low
      << "\npsi_high=" << s.psi_high << "\nlambda_scale=" << s.lambda_scale << "\nseed=" << s.seed
      << '\n';
}

namespace {

// Draws one (x, y) from component c of `truth`; returns whether z = general.
Instance draw(const MegaModel& truth, Domain domain, double pi_general, std::uint64_t stream,
              bool& general) {
  Rng rng(stream);
  general = rng.bernoulli(pi_general);
  const Component c = general ? Component::General : specific(domain);
  Instance inst;
  inst.domain = domain;
  const auto& psi = truth.means(c);
  for (int f = 0; f < truth.num_features; ++f)
    if (rng.bernoulli(psi[f])) inst.features.push_back(f);
  const auto p = class_distribution(truth.weights(c), inst.features);
  double u = rng.uniform(), acc = 0.0;
  inst.label = static_cast<int>(p.size()) - 1;
  for (std::size_t y = 0; y < p.size(); ++y) {
    acc += p[y];
    if (u < acc) {
      inst.label = static_cast<int>(y);
      break;
    }
  }
  return inst;
}

}  // namespace

SynthCorpus generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  SynthCorpus out;
  MegaModel& truth = out.truth;
  truth = MegaModel::initial(spec.num_classes, spec.num_features);
  truth.pi_in = spec.pi_in;
  truth.pi_out = spec.pi_out;

  Rng params(derive_seed(spec.seed, ~std::uint64_t{0}));
  for (int c = 0; c < 3; ++c) {
    for (double& p : truth.psi[c]) p = spec.psi_low + (spec.psi_high - spec.psi_low) * params.uniform();
    auto& w = truth.lambda[c];
    for (int y = 0; y < spec.num_classes; ++y)
      for (int f = 0; f < spec.num_features; ++f) w.at(y, f) = spec.lambda_scale * params.normal();
  }

  for (int f = 0; f < spec.num_features; ++f) truth.features.add("f" + std::to_string(f));
  for (int y = 0; y < spec.num_classes; ++y) truth.labels.add("y" + std::to_string(y));
  out.train.features = truth.features;
  out.train.labels = truth.labels;

  std::uint64_t index = 0;
  auto emit = [&](int count, Domain d, double pi, std::vector<Instance>& dst, std::vector<char>& latent) {
    for (int n = 0; n < count; ++n) {
      bool general = false;
      dst.push_back(draw(truth, d, pi, derive_seed(spec.seed, index++), general));
      latent.push_back(static_cast<char>(general));
    }
  };
  emit(spec.n_in, Domain::In, spec.pi_in, out.train.instances, out.train_general);
  emit(spec.n_out, Domain::Out, spec.pi_out, out.train.instances, out.train_general);
  emit(spec.n_test, Domain::In, spec.pi_in, out.test, out.test_general);
  return out;
}

}  // namespace megam
