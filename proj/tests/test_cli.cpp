// Runs the megam binary end to end in a scratch directory.
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "megam/baselines.hpp"
#include "megam/corpus.hpp"

using namespace megam;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("megam_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = std::string(MEGAM_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void put(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::vector<std::vector<std::string>> tsv(const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(path));
  std::string line;
  while (std::getline(in, line)) {
    rows.emplace_back();
    std::istringstream cells(line);
    std::string c;
    while (std::getline(cells, c, '\t')) rows.back().push_back(c);
  }
  return rows;
}

std::size_t count_lines(const std::string& path) {
  std::size_t n = 0;
  std::istringstream in(slurp(path));
  std::string line;
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

const char* kSpec = "num_features=8\nn_in=40\nn_out=120\nn_test=30\nseed=5\n";

}  // namespace

TEST_CASE("synth: line counts, determinism, ground truth") {
  Scratch s;
  put(s / "spec", kSpec);
  REQUIRE(run("synth --spec " + s / "spec" + " --out " + s / "a") == 0);
  REQUIRE(run("synth --spec " + s / "spec" + " --out " + s / "b") == 0);
  CHECK(count_lines(s / "a.train") + count_lines(s / "a.test") == 40 + 120 + 30);
  CHECK(slurp(s / "a.train") == slurp(s / "b.train"));
  CHECK(slurp(s / "a.truth") == slurp(s / "b.truth"));
  for (const auto& e : fs::directory_iterator(s.dir)) CHECK(e.path().string().find(".tmp.") == std::string::npos);

  put(s / "spec1", std::string(kSpec) + "pi_in=1\n");
  REQUIRE(run("synth --spec " + s / "spec1" + " --out " + s / "g") == 0);
  const auto truth = slurp(s / "g.truth");
  CHECK(truth.find("pi_in=1\n") != std::string::npos);
  CHECK(truth.find("\npi 1 ") != std::string::npos);
  // every in-domain line came from the general component
  std::istringstream latent(slurp(s / "g.latent"));
  std::string line;
  int n = 0;
  while (std::getline(latent, line) && n++ < 40) CHECK(line == "train\tgeneral");
  CHECK(run("synth --spec " + s / "spec" + " --out " + s / "missing/dir/x") == 2);
}

TEST_CASE("train: trace size, onlyi ignores out-of-domain lines, bad input") {
  Scratch s;
  put(s / "spec", kSpec);
  REQUIRE(run("synth --spec " + s / "spec" + " --out " + s / "c") == 0);
  REQUIRE(run("train --system megam --iterations 3 --data " + s / "c.train" + " --model " + s / "m --trace " +
              s / "t") == 0);
  const auto trace = tsv(s / "t");
  CHECK(trace.size() - 1 <= 3 * 3);
  CHECK(trace[0][0] == "iteration");

  std::ofstream(s / "in_only") << [&] {
    std::istringstream in(slurp(s / "c.train"));
    std::string line, kept;
    while (std::getline(in, line))
      if (line.rfind("in\t", 0) == 0) kept += line + "\n";
    return kept;
  }();
  REQUIRE(run("train --system onlyi --data " + s / "c.train" + " --model " + s / "o1") == 0);
  REQUIRE(run("train --system onlyi --data " + s / "in_only" + " --model " + s / "o2") == 0);
  CHECK(slurp(s / "o1") == slurp(s / "o2"));

  put(s / "bad", "in\ty\tf1\nin y\n");
  const std::string err = s / "err";
  const int rc = std::system((std::string(MEGAM_BIN) + " train --data " + s / "bad" + " --model " + s / "x 2>" + err).c_str());
  CHECK(WEXITSTATUS(rc) == 2);
  CHECK(slurp(err).find("line 2") != std::string::npos);
  CHECK_FALSE(fs::exists(s / "x"));
  CHECK(run("train --system nonsense --data " + s / "c.train" + " --model " + s / "x") == 1);
  CHECK(run("train --data " + s / "nowhere" + " --model " + s / "x") == 2);
}

TEST_CASE("config file: unknown keys rejected, flags win") {
  Scratch s;
  put(s / "spec", kSpec);
  REQUIRE(run("synth --spec " + s / "spec" + " --out " + s / "c") == 0);
  put(s / "bad.cfg", "sigma2=2\nwhatever=1\n");
  CHECK(run("train --system onlyi --data " + s / "c.train" + " --model " + s / "m --config " + s / "bad.cfg") == 1);
  put(s / "ok.cfg", "# tuned\nsigma2 = 0.25\nseed=4\n");
  REQUIRE(run("train --system onlyi --data " + s / "c.train" + " --model " + s / "a --config " + s / "ok.cfg") == 0);
  REQUIRE(run("train --system onlyi --data " + s / "c.train" + " --model " + s / "b --config " + s / "ok.cfg" +
              " --sigma2 3") == 0);
  CHECK(slurp(s / "a").find("sigma2 0.25\n") != std::string::npos);
  CHECK(slurp(s / "b").find("sigma2 3\n") != std::string::npos);
}

TEST_CASE("predict, eval, compare") {
  Scratch s;
  put(s / "spec", kSpec);
  REQUIRE(run("synth --spec " + s / "spec" + " --out " + s / "c") == 0);
  REQUIRE(run("train --system prior --data " + s / "c.train" + " --model " + s / "m") == 0);
  REQUIRE(run("predict --model " + s / "m --data " + s / "c.test --out " + s / "p") == 0);
  CHECK(count_lines(s / "p") == 30);
  REQUIRE(run("eval --gold " + s / "c.test --pred " + s / "p --out " + s / "r") == 0);
  CHECK(slurp(s / "r").find("instances\t30\n") != std::string::npos);

  REQUIRE(run("compare --gold " + s / "c.test --pred " + s / "p --pred " + s / "p --out " + s / "cmp") == 0);
  CHECK(slurp(s / "cmp").find("p=1.0000") != std::string::npos);

  put(s / "acc", "system\tACE-NER\nmix\t84.9\nprior\t85.1\nmegam\t92.1\n");
  REQUIRE(run("compare --table " + s / "acc --out " + s / "tab") == 0);
  const auto tab = slurp(s / "tab");
  CHECK(tab.find("Accuracy") != std::string::npos);
  CHECK(tab.find("% Reduction") != std::string::npos);
  CHECK(tab.find("47.7") != std::string::npos);
  CHECK(run("compare --gold " + s / "c.test --pred " + s / "p") == 1);
}

TEST_CASE("introspect matches the mixture posterior") {
  Scratch s;
  put(s / "spec", kSpec);
  REQUIRE(run("synth --spec " + s / "spec" + " --out " + s / "c") == 0);
  REQUIRE(run("train --system megam --iterations 2 --data " + s / "c.train" + " --model " + s / "m") == 0);
  REQUIRE(run("introspect --model " + s / "m --data " + s / "c.test --out " + s / "i") == 0);
  std::ifstream min(s / "m");
  const auto p = read_predictor(min);
  Dataset ds;
  ds.features = p.features;
  ds.labels = p.labels;
  std::ifstream din(s / "c.test");
  parse_dataset_into(din, ds, false);
  const auto rows = tsv(s / "i");
  REQUIRE(rows.size() == ds.size() + 1);
  for (std::size_t n = 0; n < ds.size(); ++n) {
    const double spec = std::stod(rows[n + 1][2]), gen = std::stod(rows[n + 1][3]);
    const auto m = predict_mixture(p.mega, ds.instances[n].features, ds.instances[n].domain);
    CHECK(gen == m.general_posterior);
    CHECK(spec + gen == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(rows[n + 1][4] == p.labels.name(m.label));
  }

  // a model with pi = 1 puts no mass on the specific component
  Predictor q = p;
  q.mega.pi_in = 1.0;
  std::ofstream(s / "m1") << [&] {
    std::ostringstream o;
    write_predictor(o, q);
    return o.str();
  }();
  REQUIRE(run("introspect --model " + s / "m1 --data " + s / "c.test --out " + s / "i1") == 0);
  const auto rows1 = tsv(s / "i1");
  for (std::size_t n = 1; n < rows1.size(); ++n) CHECK(std::stod(rows1[n][2]) <= 1e-12);
}

TEST_CASE("chain systems through the CLI") {
  Scratch s;
  std::string train, test;
  const char* tags[] = {"B-X", "I-X", "O"};
  for (int n = 0; n < 40; ++n) {
    std::string block = n % 3 ? "@domain out\n" : "@domain in\n";
    for (int t = 0; t < 1 + n % 5; ++t) {
      const int k = (n + t) % 3;
      block += std::string(tags[k]) + "\tw" + std::to_string(k) + " p" + std::to_string(t % 2) + "\n";
    }
    (n < 30 ? train : test) += block + "\n";
  }
  put(s / "train", train);
  put(s / "test", test);
  for (const char* sys : {"memm", "mega-memm"}) {
    const std::string m = s / (std::string(sys) + ".model"), pr = s / (std::string(sys) + ".pred");
    REQUIRE(run(std::string("train --iterations 2 --system ") + sys + " --data " + s / "train" + " --model " + m) == 0);
    REQUIRE(run("predict --model " + m + " --data " + s / "test" + " --out " + pr) == 0);
    REQUIRE(run("eval --chunks --gold " + s / "test" + " --pred " + pr + " --out " + s / "r") == 0);
    CHECK(slurp(s / "r").find("chunk_f\t") != std::string::npos);
  }
}
