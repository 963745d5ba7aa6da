// megam: command-line front end.
//
//   megam synth      --spec S --out PREFIX
//   megam train      --system K --data D --model M [--trace T]
//   megam predict    --model M --data D --out P
//   megam eval       --gold D --pred P [--chunks]
//   megam cv         --data D [--systems a,b,...] [--folds 10]
//   megam curve      --train D --test T --sizes 0,50,...
//   megam compare    --gold D --pred A --pred B ... | --table ACC.tsv
//   megam introspect --model M --data D
//
// Exit status: 0 ok, 1 usage, 2 data or I/O error, 3 numeric failure.

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "megam/baselines.hpp"
#include "megam/chain.hpp"
#include "megam/corpus.hpp"
#include "megam/eval.hpp"
#include "megam/mega.hpp"
#include "megam/optim.hpp"
#include "megam/parallel.hpp"
#include "megam/synth.hpp"

using namespace megam;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- files -----------------------------------------------------------------

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path + "'");
  return in;
}

void check_input(const std::string& path) {
  if (path.empty()) return;
  if (!fs::is_regular_file(path)) throw DataError("cannot read '" + path + "'");
}

void check_output(const std::string& path) {
  if (path.empty() || path == "-") return;
  const auto dir = fs::path(path).parent_path();
  if (!dir.empty() && !fs::is_directory(dir)) throw DataError("no such directory for '" + path + "'");
}

// Writes through a temporary next to the target, then renames over it.
void write_atomically(const std::string& path, const std::function<void(std::ostream&)>& body) {
  if (path.empty() || path == "-") {
    body(std::cout);
    std::cout.flush();
    return;
  }
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write '" + path + "'");
    body(out);
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw DataError("write failed for '" + path + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw DataError("cannot write '" + path + "': " + ec.message());
  }
}

// Parse errors get the file name in front of the line number.
template <class F>
auto with_file(const std::string& path, F&& parse) {
  try {
    return parse();
  } catch (const ParseError& e) {
    throw DataError(path + ": " + e.what());
  }
}

Dataset load_dataset(const std::string& path) {
  auto in = open_input(path);
  return with_file(path, [&] { return parse_dataset(in); });
}

SequenceDataset load_sequences(const std::string& path) {
  auto in = open_input(path);
  return with_file(path, [&] { return parse_sequences(in); });
}

std::vector<std::string> read_lines(const std::string& path) {
  auto in = open_input(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// ---- models ----------------------------------------------------------------

std::string model_header(const std::string& path) {
  auto in = open_input(path);
  std::string tag;
  in >> tag;
  return tag;
}

Predictor load_predictor(const std::string& path) {
  auto in = open_input(path);
  return with_file(path, [&] { return read_predictor(in); });
}

ChainModel load_chain(const std::string& path) {
  auto in = open_input(path);
  return with_file(path, [&] { return read_chain_model(in); });
}

FeatureAlphabet observation_alphabet(const ChainModel& m) {
  FeatureAlphabet a;
  for (int f = 0; f < m.layout.base_features; ++f) a.add(m.features.name(f));
  return a;
}

// ---- shared hyperparameter flags -----------------------------------------

struct Hyper {
  double sigma2 = 1.0;
  std::vector<double> sigma2_grid;
  double beta_a = 2.0;
  double beta_b = 2.0;
  int iterations = 5;
  int psi_sweeps = 20;
  bool paper_psi_prior = false;
  std::optional<double> alpha;
  double dev_fraction = 0.2;
  std::uint64_t seed = 1;
  int threads = default_threads();
  int ig_top = 0;

  void add_to(CLI::App* app) {
    app->add_option("--sigma2", sigma2, "Gaussian prior variance")->capture_default_str();
    app->add_option("--sigma2-grid", sigma2_grid, "variances tried on a dev split")->delimiter(',');
    app->add_option("--beta-a", beta_a, "Beta prior on psi, first shape")->capture_default_str();
    app->add_option("--beta-b", beta_b, "Beta prior on psi, second shape")->capture_default_str();
    app->add_option("--iterations", iterations, "CEM iterations")->capture_default_str();
    app->add_option("--psi-sweeps", psi_sweeps, "coordinate sweeps per psi step")->capture_default_str();
    app->add_flag("--paper-psi-prior", paper_psi_prior, "psi prior exactly as printed");
    app->add_option("--alpha", alpha, "fixed LinI weight");
    app->add_option("--dev-fraction", dev_fraction, "held-out share for tuning")->capture_default_str();
    app->add_option("--seed", seed, "random seed")->capture_default_str();
    app->add_option("--threads", threads, "worker threads (default $MEGAM_THREADS or 1)")->capture_default_str();
    app->add_option("--ig-top", ig_top, "naive-Bayes part uses only the top-k domain-informative features");
  }

  MegaHyperparams mega() const {
    MegaHyperparams h;
    h.sigma2 = sigma2;
    h.beta_a = beta_a;
    h.beta_b = beta_b;
    h.cem_iterations = iterations;
    h.psi_sweeps = psi_sweeps;
    h.paper_psi_prior = paper_psi_prior;
    return h;
  }

  SystemConfig system(std::span<const Instance> train, int num_features) const {
    SystemConfig c;
    c.sigma2 = sigma2;
    c.sigma2_grid = sigma2_grid;
    c.dev_fraction = dev_fraction;
    c.seed = seed;
    c.mega = mega();
    c.alpha = alpha;
    c.threads = threads;
    c.psi_mask = mask(train, num_features);
    return c;
  }

  std::vector<char> mask(std::span<const Instance> train, int num_features) const {
    if (ig_top <= 0) return {};
    std::vector<char> m(num_features, 0);
    for (int f : information_gain_select(train, num_features, ig_top)) m[f] = 1;
    return m;
  }
};

// key=value lines; command-line flags win.
void apply_config(CLI::App* sub, const std::string& path) {
  auto in = open_input(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ": line " + std::to_string(n) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    for (auto& ch : key)
      if (ch == '_') ch = '-';
    CLI::Option* opt = key == "config" ? nullptr : sub->get_option_no_throw("--" + key);
    if (!opt) throw UsageError(path + ": line " + std::to_string(n) + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

std::vector<SystemKind> parse_systems(const std::vector<std::string>& names) {
  std::vector<SystemKind> out;
  if (names.empty()) return {std::begin(kAllSystems), std::end(kAllSystems)};
  for (const auto& n : names) {
    const auto k = parse_system(n);
    if (!k) throw UsageError("unknown system '" + n + "'");
    out.push_back(*k);
  }
  return out;
}

// ---- subcommands -----------------------------------------------------------

struct SynthArgs {
  std::string spec, out;
  std::optional<std::uint64_t> seed;
};

void cmd_synth(const SynthArgs& a) {
  check_input(a.spec);
  check_output(a.out);
  auto in = open_input(a.spec);
  auto spec = with_file(a.spec, [&] { return parse_synth_spec(in); });
  if (a.seed) spec.seed = *a.seed;
  spec.validate();
  const auto corpus = generate_synthetic(spec);
  write_atomically(a.out + ".train", [&](std::ostream& o) { write_dataset(o, corpus.train); });
  write_atomically(a.out + ".test", [&](std::ostream& o) { write_instances(o, corpus.train, corpus.test); });
  write_atomically(a.out + ".truth", [&](std::ostream& o) {
    write_synth_spec(o, spec);
    write_mega_model(o, corpus.truth);
  });
  // which component produced each line, train then test
  write_atomically(a.out + ".latent", [&](std::ostream& o) {
    for (char g : corpus.train_general) o << "train\t" << (g ? "general" : "specific") << '\n';
    for (char g : corpus.test_general) o << "test\t" << (g ? "general" : "specific") << '\n';
  });
}

struct TrainArgs {
  std::string system = "megam", data, model, trace;
  Hyper hyper;
};

void cmd_train(const TrainArgs& a) {
  check_input(a.data);
  check_output(a.model);
  check_output(a.trace);
  const bool chain = a.system == "memm" || a.system == "mega-memm";
  if (chain) {
    const auto data = load_sequences(a.data);
    ChainConfig cfg;
    cfg.mode = a.system == "memm" ? ChainMode::Plain : ChainMode::Mega;
    cfg.hyper = a.hyper.mega();
    if (cfg.mode == ChainMode::Mega && a.hyper.ig_top > 0) {
      std::vector<Instance> tokens;
      for (const auto& s : data.sequences)
        for (const auto& x : s.tokens) tokens.push_back({x, 0, s.domain});
      cfg.psi_mask = a.hyper.mask(tokens, data.features.size());
      // transition indicators stay in the naive-Bayes part
      cfg.psi_mask.resize(data.features.size() + data.tags.size() + 1, 1);
    }
    CemTrace trace;
    const auto model = train_memm(data, cfg, &trace);
    write_atomically(a.model, [&](std::ostream& o) { write_chain_model(o, model); });
    if (!a.trace.empty() && cfg.mode == ChainMode::Mega)
      write_atomically(a.trace, [&](std::ostream& o) { write_trace_tsv(o, trace); });
    return;
  }
  const auto kind = parse_system(a.system);
  if (!kind) throw UsageError("unknown system '" + a.system + "'");
  auto ds = load_dataset(a.data);
  if (*kind == SystemKind::OnlyI) {
    // as if the out-of-domain lines were not there, alphabets included
    std::stringstream in_only;
    write_instances(in_only, ds, ds.select(Domain::In));
    ds = parse_dataset(in_only);
  }
  const auto split = split_by_domain(ds.instances);
  const auto cfg = a.hyper.system(ds.instances, ds.num_features());
  CemTrace trace;
  auto p = train_system(*kind, split.in, split.out, ds.num_labels(), ds.num_features(), cfg, &trace);
  p.features = ds.features;
  p.labels = ds.labels;
  write_atomically(a.model, [&](std::ostream& o) { write_predictor(o, p); });
  if (!a.trace.empty() && *kind == SystemKind::MegaM)
    write_atomically(a.trace, [&](std::ostream& o) { write_trace_tsv(o, trace); });
}

struct PredictArgs {
  std::string model, data, out;
};

void cmd_predict(const PredictArgs& a) {
  check_input(a.model);
  check_input(a.data);
  check_output(a.out);
  if (model_header(a.model) == "megam-chain") {
    const auto model = load_chain(a.model);
    SequenceDataset ds;
    ds.features = observation_alphabet(model);
    ds.tags = model.tags;
    auto in = open_input(a.data);
    with_file(a.data, [&] { parse_sequences_into(in, ds, false); return 0; });
    for (auto& s : ds.sequences) s.tags = viterbi_decode(model, s);
    write_atomically(a.out, [&](std::ostream& o) { write_sequences(o, ds); });
    return;
  }
  const auto p = load_predictor(a.model);
  Dataset ds;
  ds.features = p.features;
  ds.labels = p.labels;
  auto in = open_input(a.data);
  with_file(a.data, [&] { parse_dataset_into(in, ds, false); return 0; });
  write_atomically(a.out, [&](std::ostream& o) {
    for (const auto& inst : ds.instances) o << p.labels.name(predict_system(p, inst.features)) << '\n';
  });
}

// Predicted labels by name against the gold file.
std::vector<char> correctness(const Dataset& gold, const std::string& pred_path) {
  const auto pred = read_lines(pred_path);
  if (pred.size() != gold.size())
    throw DataError(pred_path + ": " + std::to_string(pred.size()) + " predictions for " +
                    std::to_string(gold.size()) + " instances");
  std::vector<char> c(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) c[i] = pred[i] == gold.labels.name(gold.instances[i].label);
  return c;
}

double percent(std::span<const char> c) {
  if (c.empty()) return 0.0;
  std::size_t hits = 0;
  for (char x : c) hits += x;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(c.size());
}

struct EvalArgs {
  std::string gold, pred, out;
  bool chunks = false;
};

void cmd_eval(const EvalArgs& a) {
  check_input(a.gold);
  check_input(a.pred);
  check_output(a.out);
  std::ostringstream report;
  report << std::fixed << std::setprecision(4);
  if (a.chunks) {
    const auto gold = load_sequences(a.gold);
    const auto pred = load_sequences(a.pred);
    if (gold.sequences.size() != pred.sequences.size()) throw DataError("sequence counts differ");
    std::vector<std::vector<std::string>> g, p;
    std::size_t hits = 0, total = 0;
    for (std::size_t i = 0; i < gold.sequences.size(); ++i) {
      const auto& gs = gold.sequences[i];
      const auto& ps = pred.sequences[i];
      if (gs.length() != ps.length()) throw DataError("sequence " + std::to_string(i + 1) + " lengths differ");
      g.emplace_back();
      p.emplace_back();
      for (std::size_t t = 0; t < gs.length(); ++t) {
        g.back().push_back(gold.tags.name(gs.tags[t]));
        p.back().push_back(pred.tags.name(ps.tags[t]));
        hits += g.back().back() == p.back().back();
        ++total;
      }
    }
    const auto s = chunk_f1(g, p);
    report << "tokens\t" << total << "\ntoken_accuracy\t" << (total ? 100.0 * hits / total : 0.0) << '\n';
    report << "chunk_precision\t" << 100 * s.precision << "\nchunk_recall\t" << 100 * s.recall
           << "\nchunk_f\t" << 100 * s.f1 << '\n';
  } else {
    const auto gold = load_dataset(a.gold);
    const auto c = correctness(gold, a.pred);
    std::size_t hits = 0;
    for (char x : c) hits += x;
    report << "instances\t" << c.size() << "\ncorrect\t" << hits << "\naccuracy\t" << percent(c) << '\n';
  }
  write_atomically(a.out, [&](std::ostream& o) { o << report.str(); });
}

struct CvArgs {
  std::string data, out, report, task = "data";
  std::vector<std::string> systems;
  int folds = 10;
  Hyper hyper;
};

void write_mcnemar_block(std::ostream& o, const std::vector<std::pair<std::string, std::vector<char>>>& runs,
                         std::size_t reference) {
  if (reference >= runs.size()) return;
  const auto& ref = runs[reference].second;
  o << "\nMcNemar, " << runs[reference].first << " against:\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i == reference) continue;
    const auto r = mcnemar(ref, runs[i].second);
    o << "  " << std::left << std::setw(8) << runs[i].first << std::right << " b=" << r.b << " c=" << r.c
      << " chi2=" << std::fixed << std::setprecision(3) << r.statistic << " p=" << std::setprecision(4)
      << r.p_value << '\n';
  }
}

void cmd_cv(const CvArgs& a) {
  check_input(a.data);
  check_output(a.out);
  check_output(a.report);
  const auto kinds = parse_systems(a.systems);
  if (a.folds < 2) throw UsageError("--folds must be at least 2");
  const auto ds = load_dataset(a.data);
  const auto cfg = a.hyper.system(ds.instances, ds.num_features());
  AccuracyTable table;
  std::vector<std::pair<std::string, std::vector<char>>> runs;
  for (SystemKind k : kinds) {
    const auto r = cross_validate(k, ds.instances, ds.num_labels(), ds.num_features(), a.folds, a.hyper.seed, cfg);
    table.emplace_back(k, 100.0 * r.mean);
    runs.emplace_back(system_name(k), r.correct);
  }
  write_atomically(a.out, [&](std::ostream& o) { write_accuracy_tsv(o, table); });
  if (!a.report.empty())
    write_atomically(a.report, [&](std::ostream& o) {
      write_comparison_table(o, a.task, table);
      std::size_t ref = runs.size();
      for (std::size_t i = 0; i < runs.size(); ++i)
        if (runs[i].first == "megam") ref = i;
      write_mcnemar_block(o, runs, ref);
    });
}

struct CurveArgs {
  std::string train, test, out;
  std::vector<std::string> systems;
  std::vector<std::size_t> sizes;
  Hyper hyper;
};

void cmd_curve(const CurveArgs& a) {
  check_input(a.train);
  check_input(a.test);
  check_output(a.out);
  const auto kinds = parse_systems(a.systems);
  const auto ds = load_dataset(a.train);
  Dataset test;
  test.features = ds.features;
  test.labels = ds.labels;
  auto in = open_input(a.test);
  with_file(a.test, [&] { parse_dataset_into(in, test, false); return 0; });
  if (test.num_labels() != ds.num_labels()) throw DataError(a.test + ": labels unseen in training");
  const auto split = split_by_domain(ds.instances);
  const auto cfg = a.hyper.system(ds.instances, ds.num_features());
  std::ostringstream body;
  body << "size\tsystem\taccuracy\n" << std::fixed << std::setprecision(2);
  for (SystemKind k : kinds) {
    auto sizes = a.sizes;
    if (k != SystemKind::OnlyO && k != SystemKind::MegaM && std::erase(sizes, 0))
      std::cerr << "megam: " << system_name(k) << " needs in-domain data, skipping size 0\n";
    const auto pts = learning_curve(k, split.in, split.out, test.instances, ds.num_labels(), ds.num_features(),
                                    sizes, a.hyper.seed, cfg);
    for (const auto& pt : pts) body << pt.size << '\t' << system_name(k) << '\t' << 100.0 * pt.accuracy << '\n';
  }
  write_atomically(a.out, [&](std::ostream& o) { o << body.str(); });
}

struct CompareArgs {
  std::string gold, table, out;
  std::vector<std::string> preds, names;
};

// system <tab> task1 <tab> task2 ... accuracies in percent
void compare_tables(const std::string& path, std::ostream& o) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw DataError(path + ": empty table");
  auto cells = [](const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream s(line);
    while (std::getline(s, cell, '\t')) out.push_back(cell);
    return out;
  };
  const auto header = cells(lines[0]);
  if (header.size() < 2) throw DataError(path + ": header needs a system column and at least one task");
  std::vector<AccuracyTable> tables(header.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto row = cells(lines[i]);
    if (row.size() != header.size())
      throw DataError(path + ": line " + std::to_string(i + 1) + ": expected " + std::to_string(header.size()) +
                      " columns");
    const auto kind = parse_system(row[0]);
    if (!kind) throw DataError(path + ": line " + std::to_string(i + 1) + ": unknown system '" + row[0] + "'");
    for (std::size_t t = 1; t < row.size(); ++t) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(row[t], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != row[t].size() || used == 0) throw DataError(path + ": line " + std::to_string(i + 1) + ": bad accuracy '" + row[t] + "'");
      tables[t - 1].emplace_back(*kind, v);
    }
  }
  for (std::size_t t = 0; t < tables.size(); ++t) {
    if (t) o << '\n';
    write_comparison_table(o, header[t + 1], tables[t]);
  }
}

void cmd_compare(const CompareArgs& a) {
  check_output(a.out);
  if (!a.table.empty()) {
    if (!a.preds.empty()) throw UsageError("--table and --pred do not mix");
    check_input(a.table);
    std::ostringstream body;
    compare_tables(a.table, body);
    write_atomically(a.out, [&](std::ostream& o) { o << body.str(); });
    return;
  }
  if (a.gold.empty() || a.preds.size() < 2) throw UsageError("need --gold and at least two --pred files, or --table");
  if (!a.names.empty() && a.names.size() != a.preds.size()) throw UsageError("one --name per --pred");
  check_input(a.gold);
  for (const auto& p : a.preds) check_input(p);
  const auto gold = load_dataset(a.gold);
  std::vector<std::pair<std::string, std::vector<char>>> runs;
  for (std::size_t i = 0; i < a.preds.size(); ++i)
    runs.emplace_back(a.names.empty() ? a.preds[i] : a.names[i], correctness(gold, a.preds[i]));
  std::ostringstream body;
  body << std::fixed << std::setprecision(2) << "accuracy\n";
  for (const auto& [name, c] : runs) body << "  " << name << '\t' << percent(c) << '\n';
  const double base = percent(runs[0].second);
  body << "% Reduction in error relative to " << runs[0].first << '\n';
  for (std::size_t i = 1; i < runs.size(); ++i) {
    body << "  " << runs[i].first << '\t';
    if (base < 100.0)
      body << std::setprecision(1) << error_reduction(base, percent(runs[i].second)) << std::setprecision(2) << '\n';
    else
      body << "n/a\n";
  }
  write_mcnemar_block(body, runs, 0);
  write_atomically(a.out, [&](std::ostream& o) { o << body.str(); });
}

struct IntrospectArgs {
  std::string model, data, out;
};

void cmd_introspect(const IntrospectArgs& a) {
  check_input(a.model);
  check_input(a.data);
  check_output(a.out);
  const auto p = load_predictor(a.model);
  if (p.kind != SystemKind::MegaM) throw DataError(a.model + ": introspect needs a megam model");
  Dataset ds;
  ds.features = p.features;
  ds.labels = p.labels;
  auto in = open_input(a.data);
  with_file(a.data, [&] { parse_dataset_into(in, ds, false); return 0; });
  std::ostringstream body;
  body << "index\tdomain\tp_specific\tp_general\tpredicted\tgold\n" << std::setprecision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& inst = ds.instances[i];
    const auto m = predict_mixture(p.mega, inst.features, inst.domain);
    body << i + 1 << '\t' << domain_name(inst.domain) << '\t' << 1.0 - m.general_posterior << '\t'
         << m.general_posterior << '\t' << p.labels.name(m.label) << '\t' << ds.labels.name(inst.label) << '\n';
  }
  write_atomically(a.out, [&](std::ostream& o) { o << body.str(); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain adaptation with a mixture of general and domain-specific maxent models"};
  app.require_subcommand(1);
  std::map<CLI::App*, std::string> configs;
  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", configs[sub], "key=value defaults"); };

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "draw a synthetic corpus");
  s->add_option("--spec", synth.spec, "key=value corpus description")->required();
  s->add_option("--out", synth.out, "output prefix: .train .test .truth .latent")->required();
  s->add_option("--seed", synth.seed, "overrides the spec's seed");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train one system");
  t->add_option("--system", train.system, "megam onlyi onlyo lini mix mixw feats prior memm mega-memm")
      ->capture_default_str();
  t->add_option("--data", train.data, "training file")->required();
  t->add_option("--model", train.model, "model output")->required();
  t->add_option("--trace", train.trace, "CEM trace (TSV)");
  train.hyper.add_to(t);
  add_config(t);

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "label a file with a trained model");
  p->add_option("--model", pred.model)->required();
  p->add_option("--data", pred.data)->required();
  p->add_option("--out", pred.out, "predictions (default stdout)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score predictions");
  e->add_option("--gold", ev.gold)->required();
  e->add_option("--pred", ev.pred)->required();
  e->add_option("--out", ev.out, "report (default stdout)");
  e->add_flag("--chunks", ev.chunks, "sequence files: token accuracy and chunk F");

  CvArgs cv;
  auto* c = app.add_subcommand("cv", "cross-validate systems on the in-domain data");
  c->add_option("--data", cv.data)->required();
  c->add_option("--systems", cv.systems, "default: all eight")->delimiter(',');
  c->add_option("--folds", cv.folds)->capture_default_str();
  c->add_option("--out", cv.out, "accuracy TSV (default stdout)");
  c->add_option("--report", cv.report, "comparison table with significance");
  c->add_option("--task", cv.task, "task name for the report")->capture_default_str();
  cv.hyper.add_to(c);
  add_config(c);

  CurveArgs cu;
  auto* u = app.add_subcommand("curve", "accuracy against in-domain training size");
  u->add_option("--train", cu.train)->required();
  u->add_option("--test", cu.test)->required();
  u->add_option("--sizes", cu.sizes)->delimiter(',')->required();
  u->add_option("--systems", cu.systems, "default: all eight")->delimiter(',');
  u->add_option("--out", cu.out, "TSV (default stdout)");
  cu.hyper.add_to(u);
  add_config(u);

  CompareArgs cmp;
  auto* m = app.add_subcommand("compare", "McNemar and error reduction between systems");
  m->add_option("--gold", cmp.gold);
  m->add_option("--pred", cmp.preds, "prediction files; the first is the reference");
  m->add_option("--name", cmp.names, "display names, one per --pred");
  m->add_option("--table", cmp.table, "accuracy TSV: system then one column per task");
  m->add_option("--out", cmp.out, "report (default stdout)");

  IntrospectArgs in;
  auto* i = app.add_subcommand("introspect", "per-example component posteriors of a megam model");
  i->add_option("--model", in.model)->required();
  i->add_option("--data", in.data)->required();
  i->add_option("--out", in.out, "TSV (default stdout)");

  try {
    app.parse(argc, argv);
    for (auto& [sub, path] : configs)
      if (sub->parsed() && !path.empty()) apply_config(sub, path);
    for (const auto* h : {&train.hyper, &cv.hyper, &cu.hyper})
      if (h->threads < 1) throw UsageError("--threads must be positive");
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& err) {
    std::cerr << "megam: " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "megam: " << err.what() << '\n';
    return 2;
  }

  try {
    if (s->parsed()) cmd_synth(synth);
    if (t->parsed()) cmd_train(train);
    if (p->parsed()) cmd_predict(pred);
    if (e->parsed()) cmd_eval(ev);
    if (c->parsed()) cmd_cv(cv);
    if (u->parsed()) cmd_curve(cu);
    if (m->parsed()) cmd_compare(cmp);
    if (i->parsed()) cmd_introspect(in);
  } catch (const UsageError& err) {
    std::cerr << "megam: " << err.what() << '\n';
    return 1;
  } catch (const NumericError& err) {
    std::cerr << "megam: numeric failure: " << err.what() << '\n';
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "megam: " << err.what() << '\n';
    return 2;
  }
  return 0;
}
