#include "megam/mega.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <string>

namespace megam {

const char* component_name(Component c) {
  switch (c) {
    case Component::In: return "in";
    case Component::Out: return "out";
    case Component::General: return "general";
  }
  return "?";
}

const char* block_name(CemBlock b) {
  switch (b) {
    case CemBlock::Pi: return "pi";
    case CemBlock::Lambda: return "lambda";
    case CemBlock::Psi: return "psi";
  }
  return "?";
}

MegaModel MegaModel::initial(int num_classes, int num_features, const MegaHyperparams& hyper) {
  MegaModel m;
  m.num_classes = num_classes;
  m.num_features = num_features;
  for (auto& l : m.lambda) l = MaxentWeights(num_classes, num_features);
  for (auto& p : m.psi) p.assign(num_features, 0.5);
  m.pi_in = m.pi_out = 0.5;
  m.hyper = hyper;
  return m;
}

SplitData split_by_domain(std::span<const Instance> data) {
  SplitData s;
  for (const auto& inst : data) (inst.domain == Domain::In ? s.in : s.out).push_back(inst);
  return s;
}

NaiveBayesTable::NaiveBayesTable(std::span<const double> psi, std::span<const char> mask)
    : delta_(psi.size(), 0.0) {
  for (std::size_t f = 0; f < psi.size(); ++f) {
    if (!mask.empty() && !mask[f]) continue;
    const double l1 = std::log(psi[f]);
    const double l0 = std::log1p(-psi[f]);
    base_ += l0;
    delta_[f] = l1 - l0;
  }
}

double NaiveBayesTable::log_likelihood(const FeatureVector& x) const {
  double s = base_;
  for (int f : x)
    if (f < static_cast<int>(delta_.size())) s += delta_[f];
  return s;
}

namespace {

double log_add(double a, double b) {
  const double mx = std::max(a, b);
  return mx + std::log1p(std::exp(std::min(a, b) - mx));
}

double logistic(double d) {
  if (d >= 0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

// Per-instance log quantities of one domain under one model.
struct Terms {
  double nb_specific;    // log psi_{n,0}
  double nb_general;     // log psi_{n,1}
  double gibbs_specific; // log p(y_n | x_n, lambda_d)
  double gibbs_general;  // log p(y_n | x_n, lambda_g)
};

std::vector<Terms> domain_terms(const MegaModel& model, std::span<const Instance> data, Domain d) {
  const Component spec = specific(d);
  const NaiveBayesTable nb_s(model.means(spec), model.psi_mask);
  const NaiveBayesTable nb_g(model.means(Component::General), model.psi_mask);
  std::vector<Terms> out(data.size());
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& x = data[n].features;
    out[n].nb_specific = nb_s.log_likelihood(x);
    out[n].nb_general = nb_g.log_likelihood(x);
    out[n].gibbs_specific = class_log_distribution(model.weights(spec), x)[data[n].label];
    out[n].gibbs_general = class_log_distribution(model.weights(Component::General), x)[data[n].label];
  }
  return out;
}

double psi_log_prior(const MegaHyperparams& h, double p) {
  if (h.paper_psi_prior) return std::log(p) - std::log1p(-p);
  return (h.beta_a - 1.0) * std::log(p) + (h.beta_b - 1.0) * std::log1p(-p);
}

double max_parameter_change(const MegaModel& a, const MegaModel& b) {
  double d = std::max(std::abs(a.pi_in - b.pi_in), std::abs(a.pi_out - b.pi_out));
  for (int c = 0; c < 3; ++c) {
    d = std::max(d, max_abs_difference(a.lambda[c], b.lambda[c]));
    for (std::size_t f = 0; f < a.psi[c].size(); ++f)
      d = std::max(d, std::abs(a.psi[c][f] - b.psi[c][f]));
  }
  return d;
}

constexpr std::array<Domain, 2> kDomains{Domain::In, Domain::Out};

}  // namespace

Responsibilities e_step(const MegaModel& model, const MegaData& data) {
  Responsibilities r;
  for (Domain d : kDomains) {
    const auto insts = data.of(d);
    const double lp1 = std::log(model.pi(d));
    const double lp0 = std::log1p(-model.pi(d));
    const auto terms = domain_terms(model, insts, d);
    auto& out = r.of(d);
    out.h.resize(insts.size());
    out.log_m.resize(insts.size());
    for (std::size_t n = 0; n < insts.size(); ++n) {
      const auto& t = terms[n];
      const double j0 = lp0 + t.nb_specific + t.gibbs_specific;
      const double j1 = lp1 + t.nb_general + t.gibbs_general;
      out.h[n] = logistic(j1 - j0);
      out.log_m[n] = -log_add(lp0 + t.nb_specific, lp1 + t.nb_general);
    }
  }
  return r;
}

double m_step_pi(const Responsibilities& resp, const MegaModel& model, const MegaData& data,
                 Domain domain) {
  const auto insts = data.of(domain);
  const auto& r = resp.of(domain);
  if (insts.empty()) return model.pi(domain);
  const auto terms = domain_terms(model, insts, domain);

  // Slice: H log pi + (N - H) log(1 - pi) - pi M1 - (1 - pi) M0
  double H = 0.0, M0 = 0.0, M1 = 0.0;
  for (std::size_t n = 0; n < insts.size(); ++n) {
    H += r.h[n];
    M0 += std::exp(r.log_m[n] + terms[n].nb_specific);
    M1 += std::exp(r.log_m[n] + terms[n].nb_general);
  }
  const double N = static_cast<double>(insts.size());
  auto slice = [&](double p) {
    return H * std::log(p) + (N - H) * std::log1p(-p) - p * M1 - (1.0 - p) * M0;
  };
  const double D = M0 - M1;
  QuadraticStationarity q{D, N - D, -H, 0.0, 1.0};
  if (auto root = solve_bounded_quadratic(q, slice)) return *root;
  return golden_section_maximize(slice, kPiMargin, 1.0 - kPiMargin, 1e-12);
}

MaxentWeights m_step_lambda(const Responsibilities& resp, const MegaModel& model,
                            const MegaData& data, Component component) {
  MaxentTrainConfig cfg;
  cfg.sigma2 = model.hyper.sigma2;
  cfg.optimizer = model.hyper.optimizer;
  std::vector<Instance> merged;
  std::span<const Instance> insts;
  if (component == Component::General) {
    merged.reserve(data.in.size() + data.out.size());
    merged.insert(merged.end(), data.in.begin(), data.in.end());
    merged.insert(merged.end(), data.out.begin(), data.out.end());
    insts = merged;
    cfg.instance_weights = resp.in.h;
    cfg.instance_weights.insert(cfg.instance_weights.end(), resp.out.h.begin(), resp.out.h.end());
  } else {
    const Domain d = component == Component::In ? Domain::In : Domain::Out;
    insts = data.of(d);
    for (double h : resp.of(d).h) cfg.instance_weights.push_back(1.0 - h);
  }
  return train_maxent(insts, model.num_classes, model.num_features, cfg, &model.weights(component))
      .weights;
}

std::vector<double> m_step_psi(const Responsibilities& resp, const MegaModel& model,
                               const MegaData& data, Component component,
                               const PsiObserver& observer) {
  const int F = model.num_features;
  std::vector<double> psi = model.means(component);
  const auto& hp = model.hyper;

  // Instances touching this component, with their Q weight w_n and the log of
  // m_n * p(z) * psi_{n,z}: the term whose sum forms the marginal penalty.
  struct Item {
    const FeatureVector* x;
    double w;
    double log_s;
  };
  std::vector<Item> items;
  for (Domain d : kDomains) {
    const bool general = component == Component::General;
    if (!general && specific(d) != component) continue;
    const auto insts = data.of(d);
    const auto& r = resp.of(d);
    const double log_prior_z = general ? std::log(model.pi(d)) : std::log1p(-model.pi(d));
    const NaiveBayesTable nb(psi, model.psi_mask);
    for (std::size_t n = 0; n < insts.size(); ++n) {
      const double w = general ? r.h[n] : 1.0 - r.h[n];
      items.push_back({&insts[n].features, w, r.log_m[n] + log_prior_z + nb.log_likelihood(insts[n].features)});
    }
  }

  // Posting lists: which items have feature f switched on.
  std::vector<std::vector<std::size_t>> postings(F);
  std::vector<double> w_on(F, 0.0);
  double w_total = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    w_total += items[i].w;
    for (int f : *items[i].x) {
      if (f >= F || !model.models_feature(f)) continue;
      postings[f].push_back(i);
      w_on[f] += items[i].w;
    }
  }

  for (int sweep = 0; sweep < hp.psi_sweeps; ++sweep) {
    // Lazily applied common offset for the log_s of every item.
    double offset = 0.0;
    double s_total = 0.0;
    for (const auto& it : items) s_total += std::exp(it.log_s);

    double max_change = 0.0;
    for (int f = 0; f < F; ++f) {
      if (!model.models_feature(f)) continue;
      const double p = psi[f];
      double s_on = 0.0;
      for (auto i : postings[f]) s_on += std::exp(items[i].log_s + offset);
      const double s_off = std::max(0.0, s_total - s_on);
      const double w_off = w_total - w_on[f];

      // dQ/dpsi = A/psi - B/(1 - psi) - C
      const double C = s_on / p - s_off / (1.0 - p);
      double A, B;
      if (hp.paper_psi_prior) {
        A = 1.0 + w_on[f];
        B = w_off - 1.0;
      } else {
        A = hp.beta_a - 1.0 + w_on[f];
        B = hp.beta_b - 1.0 + w_off;
      }
      auto slice = [&](double t) {
        return psi_log_prior(hp, t) + w_on[f] * std::log(t) + w_off * std::log1p(-t) -
               (s_on / p) * t - (s_off / (1.0 - p)) * (1.0 - t);
      };
      const QuadraticStationarity q{C, -(A + B + C), A, 0.0, 1.0};
      double updated;
      if (auto root = solve_bounded_quadratic(q, slice))
        updated = *root;
      else
        updated = golden_section_maximize(slice, kPsiMargin, 1.0 - kPsiMargin, 1e-12);

      if (observer) observer(f, psi, updated);
      max_change = std::max(max_change, std::abs(updated - p));
      if (updated == p) continue;

      const double log_on = std::log(updated) - std::log(p);
      const double log_off = std::log1p(-updated) - std::log1p(-p);
      offset += log_off;
      for (auto i : postings[f]) items[i].log_s += log_on - log_off;
      s_total = s_on * std::exp(log_on) + s_off * std::exp(log_off);
      psi[f] = updated;
    }
    for (auto& it : items) it.log_s += offset;
    if (max_change < hp.psi_tolerance) break;
  }
  return psi;
}

double log_prior(const MegaModel& model) {
  const double inv = 1.0 / model.hyper.sigma2;
  double s = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (double v : model.lambda[c].values()) s -= 0.5 * v * v * inv;
    for (int f = 0; f < model.num_features; ++f)
      if (model.models_feature(f)) s += psi_log_prior(model.hyper, model.psi[c][f]);
  }
  return s;
}

double penalized_conditional_log_likelihood(const MegaModel& model, const MegaData& data) {
  double total = log_prior(model);
  for (Domain d : kDomains) {
    const double lp1 = std::log(model.pi(d));
    const double lp0 = std::log1p(-model.pi(d));
    for (const auto& t : domain_terms(model, data.of(d), d)) {
      total += log_add(lp0 + t.nb_specific + t.gibbs_specific, lp1 + t.nb_general + t.gibbs_general) -
               log_add(lp0 + t.nb_specific, lp1 + t.nb_general);
    }
  }
  return total;
}

double q_bound(const MegaModel& current, const MegaModel& previous, const Responsibilities& resp,
               const MegaData& data) {
  double q = log_prior(current) - log_prior(previous);
  for (Domain d : kDomains) {
    const auto insts = data.of(d);
    const auto& r = resp.of(d);
    const auto now = domain_terms(current, insts, d);
    const auto before = domain_terms(previous, insts, d);
    const double c1 = std::log(current.pi(d)), c0 = std::log1p(-current.pi(d));
    const double p1 = std::log(previous.pi(d)), p0 = std::log1p(-previous.pi(d));
    for (std::size_t n = 0; n < insts.size(); ++n) {
      const auto& a = now[n];
      const auto& b = before[n];
      const double dj1 = (c1 + a.nb_general + a.gibbs_general) - (p1 + b.nb_general + b.gibbs_general);
      const double dj0 = (c0 + a.nb_specific + a.gibbs_specific) - (p0 + b.nb_specific + b.gibbs_specific);
      const double ratio = std::exp(r.log_m[n] + log_add(c0 + a.nb_specific, c1 + a.nb_general));
      q += r.h[n] * dj1 + (1.0 - r.h[n]) * dj0 - ratio + 1.0;
    }
  }
  return q;
}

CemResult train_cem(const MegaData& data, const MegaHyperparams& hyper, std::vector<char> psi_mask) {
  if (data.num_classes < 1 || data.num_features < 0) throw DataError("empty alphabets");
  if (!psi_mask.empty() && static_cast<int>(psi_mask.size()) != data.num_features)
    throw DataError("psi mask size does not match the feature count");
  if (!(hyper.sigma2 > 0.0) || hyper.beta_a < 1.0 || hyper.beta_b < 1.0)
    throw DataError("invalid hyperparameters");

  CemResult result;
  MegaModel& model = result.model;
  model = MegaModel::initial(data.num_classes, data.num_features, hyper);
  model.psi_mask = std::move(psi_mask);
  auto& trace = result.trace;
  trace.objective.push_back(penalized_conditional_log_likelihood(model, data));

  using Clock = std::chrono::steady_clock;
  for (int it = 0; it < hyper.cem_iterations; ++it) {
    const auto resp = e_step(model, data);
    const MegaModel previous = model;
    auto record = [&](CemBlock block, Clock::time_point start) {
      CemRecord rec;
      rec.iteration = it;
      rec.block = block;
      rec.q = q_bound(model, previous, resp, data);
      rec.negative_cll = -penalized_conditional_log_likelihood(model, data);
      rec.seconds = std::chrono::duration<double>(Clock::now() - start).count();
      trace.records.push_back(rec);
    };

    auto start = Clock::now();
    const double pi_in = m_step_pi(resp, model, data, Domain::In);
    const double pi_out = m_step_pi(resp, model, data, Domain::Out);
    model.pi_in = pi_in;
    model.pi_out = pi_out;
    record(CemBlock::Pi, start);

    start = Clock::now();
    for (Component c : {Component::In, Component::Out, Component::General}) {
      auto updated = m_step_lambda(resp, model, data, c);
      model.weights(c) = std::move(updated);
    }
    record(CemBlock::Lambda, start);

    start = Clock::now();
    for (Component c : {Component::In, Component::Out, Component::General}) {
      auto updated = m_step_psi(resp, model, data, c);
      model.means(c) = std::move(updated);
    }
    record(CemBlock::Psi, start);

    trace.objective.push_back(-trace.records.back().negative_cll);
    trace.iterations = it + 1;
    if (max_parameter_change(model, previous) < hyper.convergence_tolerance) {
      trace.converged = true;
      break;
    }
  }
  return result;
}

std::vector<double> mixture_log_scores(const MegaModel& model, const FeatureVector& x, Domain domain) {
  const Component spec = specific(domain);
  const double lg = std::log(model.pi(domain)) +
                    NaiveBayesTable(model.means(Component::General), model.psi_mask).log_likelihood(x);
  const double ls = std::log1p(-model.pi(domain)) +
                    NaiveBayesTable(model.means(spec), model.psi_mask).log_likelihood(x);
  const auto pg = class_log_distribution(model.weights(Component::General), x);
  const auto ps = class_log_distribution(model.weights(spec), x);
  std::vector<double> scores(pg.size());
  for (std::size_t y = 0; y < pg.size(); ++y) scores[y] = log_add(lg + pg[y], ls + ps[y]);
  return scores;
}

MixturePrediction predict_mixture(const MegaModel& model, const FeatureVector& x, Domain domain) {
  MixturePrediction out;
  const auto scores = mixture_log_scores(model, x, domain);
  const double lz = log_sum_exp(scores);
  out.probabilities.resize(scores.size());
  for (std::size_t y = 0; y < scores.size(); ++y) out.probabilities[y] = std::exp(scores[y] - lz);
  out.label = argmax(scores);
  const double lg = std::log(model.pi(domain)) +
                    NaiveBayesTable(model.means(Component::General), model.psi_mask).log_likelihood(x);
  const double ls = std::log1p(-model.pi(domain)) +
                    NaiveBayesTable(model.means(specific(domain)), model.psi_mask).log_likelihood(x);
  out.general_posterior = logistic(lg - ls);
  return out;
}

void write_mega_model(std::ostream& out, const MegaModel& m) {
  out << "megam-model 1\n";
  out << std::setprecision(17);
  out << "dims " << m.num_classes << ' ' << m.num_features << '\n';
  const auto& h = m.hyper;
  out << "hyper " << h.sigma2 << ' ' << h.beta_a << ' ' << h.beta_b << ' ' << h.cem_iterations << ' '
      << h.psi_sweeps << ' ' << h.psi_tolerance << ' ' << h.convergence_tolerance << ' '
      << (h.paper_psi_prior ? 1 : 0) << '\n';
  out << "pi " << m.pi_in << ' ' << m.pi_out << '\n';
  out << "mask " << m.psi_mask.size();
  for (char c : m.psi_mask) out << ' ' << (c ? 1 : 0);
  out << '\n';
  for (int c = 0; c < 3; ++c) {
    out << "psi " << component_name(static_cast<Component>(c));
    for (double v : m.psi[c]) out << ' ' << v;
    out << '\n';
  }
  for (int c = 0; c < 3; ++c) {
    out << "lambda " << component_name(static_cast<Component>(c)) << '\n';
    write_weights(out, m.lambda[c]);
  }
  write_alphabet(out, "labels", m.labels);
  write_alphabet(out, "features", m.features);
}

MegaModel read_mega_model(std::istream& in) {
  auto expect = [&](const char* word) {
    std::string w;
    if (!(in >> w) || w != word) throw ParseError(0, std::string("model file: expected '") + word + "'");
  };
  MegaModel m;
  int version = 0;
  expect("megam-model");
  if (!(in >> version) || version != 1) throw ParseError(0, "unsupported model version");
  expect("dims");
  in >> m.num_classes >> m.num_features;
  expect("hyper");
  int paper = 0;
  auto& h = m.hyper;
  in >> h.sigma2 >> h.beta_a >> h.beta_b >> h.cem_iterations >> h.psi_sweeps >> h.psi_tolerance >>
      h.convergence_tolerance >> paper;
  h.paper_psi_prior = paper != 0;
  expect("pi");
  in >> m.pi_in >> m.pi_out;
  expect("mask");
  std::size_t nmask = 0;
  in >> nmask;
  m.psi_mask.resize(nmask);
  for (auto& c : m.psi_mask) {
    int v = 0;
    in >> v;
    c = static_cast<char>(v != 0);
  }
  for (int c = 0; c < 3; ++c) {
    expect("psi");
    std::string name;
    in >> name;
    m.psi[c].resize(m.num_features);
    for (double& v : m.psi[c]) in >> v;
  }
  for (int c = 0; c < 3; ++c) {
    expect("lambda");
    std::string name;
    in >> name;
    m.lambda[c] = read_weights(in);
  }
  if (!in) throw ParseError(0, "truncated model file");
  m.labels = read_alphabet(in, "labels");
  m.features = read_alphabet(in, "features");
  return m;
}

void write_trace_tsv(std::ostream& out, const CemTrace& trace) {
  out << "iteration\tblock\tq\tneg_cll\tseconds\n";
  out << std::setprecision(12);
  for (const auto& r : trace.records)
    out << r.iteration + 1 << '\t' << block_name(r.block) << '\t' << r.q << '\t' << r.negative_cll
        << '\t' << r.seconds << '\n';
}

}  // namespace megam
