#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <app.hpp>
#include <trimfit/diagnostics.hpp>
#include <config.hpp>
#include <schema.hpp>

namespace fs = std::filesystem;
using trimfit::cli::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "trimfit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = trimfit::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

class Scratch {
 public:
  Scratch() {
    root_ = fs::temp_directory_path() / ("trimfit-cli-" + std::to_string(::getpid()) + "-" +
                                         std::to_string(counter_++));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Scratch() { fs::remove_all(root_); }
  fs::path path(const std::string& name) const { return root_ / name; }
  std::string str(const std::string& name) const { return path(name).string(); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }

 private:
  static inline int counter_ = 0;
  fs::path root_;
};

const char* kSingle = R"({
  "version": 1, "seed": 3, "n": 50,
  "model": {"components": [[1.0, -2.0, 0.5]]}
})";

const char* kTwo = R"({
  "version": 1, "seed": 5, "n": 400,
  "model": {"components": [[1, 0, 0, 0], [-1, 0, 0, 0]]},
  "corruption": {"gamma_star": 0.1, "adversary": "oblivious-random", "magnitude": 5}
})";

}  // namespace

TEST_CASE("generate writes two deterministic files") {
  Scratch s;
  s.write("m1.json", kSingle);
  auto r = cli({"generate", s.str("m1.json"), "--out-dir", s.str("a")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("tau_star: 1") != std::string::npos);
  CHECK(line_count(s.path("a/dataset.csv")) == 51);
  CHECK(fs::exists(s.path("a/truth.json")));
  REQUIRE(cli({"generate", s.str("m1.json"), "--out-dir", s.str("b")}).code == 0);
  CHECK(slurp(s.path("a/dataset.csv")) == slurp(s.path("b/dataset.csv")));
  CHECK(slurp(s.path("a/truth.json")) == slurp(s.path("b/truth.json")));
  CHECK(trimfit::cli::validate(json::parse(slurp(s.path("a/truth.json"))),
                               json::parse(trimfit::cli::embedded_schema("truth")))
            .empty());
}

TEST_CASE("generate reports a missing field by name") {
  Scratch s;
  s.write("bad.json", R"({"version": 1, "n": 10, "model": {"components": [[1, 0]]}})");
  auto r = cli({"generate", s.str("bad.json"), "--out-dir", s.str("o")});
  CHECK(r.code == 1);
  CHECK(r.err.find("seed") != std::string::npos);
  s.write("ver.json", R"({"version": 9, "seed": 1, "n": 10, "model": {"components": [[1, 0]]}})");
  CHECK(cli({"generate", s.str("ver.json")}).code == 1);
}

TEST_CASE("fit exit codes and trace layout") {
  Scratch s;
  s.write("m1.json", kSingle);
  s.write("m2.json", kTwo);
  REQUIRE(cli({"generate", s.str("m1.json"), "--out-dir", s.str("one")}).code == 0);
  REQUIRE(cli({"generate", s.str("m2.json"), "--out-dir", s.str("two")}).code == 0);

  auto r = cli({"fit", s.str("one/dataset.csv"), "--tau", "1", "--out-dir", s.str("fit1")});
  CHECK(r.code == 0);
  CHECK(line_count(s.path("fit1/trace.csv")) == 2);
  const json summary = json::parse(slurp(s.path("fit1/summary.json")));
  CHECK(summary["rounds_used"] == 1);

  r = cli({"fit", s.str("two/dataset.csv"), "--tau", "0.4", "--theta0", "0.3,0.2,0.1,0",
           "--max-rounds", "1", "--tol", "0", "--out-dir", s.str("fit2")});
  CHECK(r.code == 2);

  r = cli({"fit", s.str("two/dataset.csv"), "--tau", "0.4", "--theta0", "0.6,0,0,0", "--gd",
           "--schedule", "adaptive", "--w", "10", "--truth", s.str("two/truth.json"), "--out-dir",
           s.str("fit3")});
  CHECK((r.code == 0 || r.code == 2));
  std::ifstream trace(s.path("fit3/trace.csv"));
  std::string header;
  std::getline(trace, header);
  CHECK(header == "round,step_norm,trimmed_loss,dist_to_nearest,inner_steps");

  r = cli({"fit", s.str("two/dataset.csv"), "--theta0", "1,2"});
  CHECK(r.code == 1);
  CHECK(r.err.find("theta0") != std::string::npos);
}

TEST_CASE("global exit codes and schema") {
  Scratch s;
  s.write("m1.json", kSingle);
  s.write("m2.json", kTwo);
  REQUIRE(cli({"generate", s.str("m1.json"), "--out-dir", s.str("one")}).code == 0);
  REQUIRE(cli({"generate", s.str("m2.json"), "--out-dir", s.str("two")}).code == 0);

  auto r = cli({"global", s.str("one/dataset.csv"), "--m", "1", "--tau", "0.9", "--truth",
                s.str("one/truth.json"), "--out-dir", s.str("g1")});
  CHECK(r.code == 0);
  const json report = json::parse(slurp(s.path("g1/report.json")));
  CHECK(trimfit::cli::validate(report, json::parse(trimfit::cli::embedded_schema("recovery"))).empty());
  CHECK(report["epsilon_recovery"].get<double>() <= 1e-6);

  r = cli({"global", s.str("two/dataset.csv"), "--m", "2", "--tau", "0.45,0.45", "--budget", "1",
           "--radius", "1e-9", "--max-rounds", "1", "--delta", "1e-12", "--out-dir", s.str("g2")});
  CHECK(r.code == 3);

  s.write("gcfg.json", R"({"version": 1, "m": 1, "tau_list": [0.9], "candidate_budget": 5})");
  r = cli({"global", s.str("one/dataset.csv"), "--config", s.str("gcfg.json"), "--out-dir", s.str("g3")});
  CHECK(r.code == 0);
  CHECK(cli({"global", s.str("one/dataset.csv")}).code == 1);
}

TEST_CASE("diagnose quantities") {
  Scratch s;
  s.write("m2.json", kTwo);
  REQUIRE(cli({"generate", s.str("m2.json"), "--out-dir", s.str("two")}).code == 0);
  s.write("tiny.json", R"({"version": 1, "seed": 1, "n": 10,
    "model": {"components": [[1, 0], [0, 1]]}})");
  REQUIRE(cli({"generate", s.str("tiny.json"), "--out-dir", s.str("tiny")}).code == 0);

  auto r = cli({"diagnose", s.str("two/dataset.csv"), "--truth", s.str("two/truth.json"),
                "--q-separation", "--out-dir", s.str("d1")});
  CHECK(r.code == 0);
  CHECK(r.out.find("Q = 2") != std::string::npos);
  CHECK(r.out.find("Q_1 = 2") != std::string::npos);

  r = cli({"diagnose", s.str("tiny/dataset.csv"), "--truth", s.str("tiny/truth.json"), "--regularity",
           "4", "--mode", "exact", "--out-dir", s.str("d2")});
  CHECK(r.code == 0);
  const json rep = json::parse(slurp(s.path("d2/diagnostics.json")));
  const auto data = trimfit::read_dataset_csv(s.path("tiny/dataset.csv"));
  const auto lib = trimfit::feature_regularity_exact(data.X(), 4);
  CHECK(rep["regularity"]["psi_plus"].get<double>() == lib.psi_plus);
  CHECK(rep["regularity"]["psi_minus"].get<double>() == lib.psi_minus);

  r = cli({"diagnose", s.str("two/dataset.csv"), "--truth", s.str("two/truth.json"), "--regularity",
           "100", "--mode", "exact", "--out-dir", s.str("d3")});
  CHECK(r.code == 1);
  CHECK(r.err.find("2000000") != std::string::npos);

  r = cli({"diagnose", s.str("two/dataset.csv"), "--truth", s.str("two/truth.json"), "--affine-error",
           "--contraction-bound", "--tau", "0.4", "--theta0", "0.6,0,0,0", "--out-dir", s.str("d4")});
  CHECK(r.code == 0);
  const json full = json::parse(slurp(s.path("d4/diagnostics.json")));
  CHECK(full["affine_error"]["estimates"].size() == 4);
  CHECK(full.contains("contraction_bound"));
}

TEST_CASE("experiment rows, aggregate and idempotence") {
  Scratch s;
  s.write("exp.json", R"({
    "version": 1, "name": "smoke", "seed": 10, "repeats": 3, "n": 300,
    "model": {"components": [[1, 0, 0], [-1, 0, 0]]},
    "solver": {"kind": "ilts", "tau": 0.4, "max_rounds": 20,
               "theta0": {"from": 0, "toward": 1, "fraction": 0.2}},
    "diagnostics": ["q-separation", "subspace-distance"]
  })");
  auto r = cli({"experiment", s.str("exp.json"), "--out-dir", s.str("e1")});
  REQUIRE(r.code == 0);
  CHECK(line_count(s.path("e1/results.csv")) == 4);
  CHECK(line_count(s.path("e1/summary.csv")) == 2);
  CHECK(fs::exists(s.path("e1/traces/repeat_002.csv")));
  CHECK(fs::exists(s.path("e1/curves.csv")));
  REQUIRE(cli({"experiment", s.str("exp.json"), "--out-dir", s.str("e2")}).code == 0);
  for (const char* f : {"results.csv", "summary.csv", "curves.csv", "manifest.json", "traces/repeat_000.csv"}) {
    CHECK(slurp(s.path(std::string("e1/") + f)) == slurp(s.path(std::string("e2/") + f)));
  }

  ::setenv("TRIMFIT_THREADS", "3", 1);
  REQUIRE(cli({"experiment", s.str("exp.json"), "--out-dir", s.str("e3")}).code == 0);
  ::unsetenv("TRIMFIT_THREADS");
  CHECK(slurp(s.path("e1/results.csv")) == slurp(s.path("e3/results.csv")));
}

TEST_CASE("experiment records failing repeats and exits nonzero") {
  Scratch s;
  s.write("bad.json", R"({
    "version": 1, "name": "rankfail", "seed": 1, "repeats": 2, "n": 20,
    "model": {"components": [[1, 0, 0, 0, 0]]},
    "solver": {"kind": "ilts", "tau": 0.1}
  })");
  auto r = cli({"experiment", s.str("bad.json"), "--out-dir", s.str("o")});
  CHECK(r.code == 1);
  const std::string results = slurp(s.path("o/results.csv"));
  CHECK(results.find(",error,") != std::string::npos);

  s.write("both.json", R"({"version": 1, "name": "x", "seed": 1, "n": 5, "dataset": "a.csv",
    "model": {"components": [[1]]}, "solver": {"kind": "none"}})");
  CHECK(cli({"experiment", s.str("both.json")}).code == 1);
}

TEST_CASE("argument errors exit 1, help exits 0") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"bogus"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"fit", "/no/such/file.csv"}).code == 1);
}

TEST_CASE("schema validator") {
  const json schema = json::parse(R"({
    "type": "object", "required": ["a"],
    "properties": {
      "a": {"type": "integer", "minimum": 0},
      "b": {"type": ["array", "null"], "items": {"enum": ["x", "y"]}},
      "c": {"const": 1}
    }})");
  CHECK(trimfit::cli::validate(json::parse(R"({"a": 2, "b": ["x"], "c": 1})"), schema).empty());
  CHECK(trimfit::cli::validate(json::parse(R"({"a": 2, "b": null})"), schema).empty());
  CHECK(trimfit::cli::validate(json::parse(R"({"b": ["z"]})"), schema).size() == 2);
  CHECK(trimfit::cli::validate(json::parse(R"({"a": -1, "c": 2})"), schema).size() == 2);
  CHECK(trimfit::cli::validate(json::parse(R"({"a": 1.5})"), schema).size() == 1);
  for (const char* name : {"truth", "trace-summary", "recovery", "diagnostics", "experiment"}) {
    CHECK_FALSE(trimfit::cli::embedded_schema(name).empty());
  }
}

TEST_CASE("shipped acceptance configs parse") {
  const fs::path dir = fs::path(TRIMFIT_SOURCE_DIR) / "configs";
  REQUIRE(fs::exists(dir));
  std::size_t seen = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    const json cfg = trimfit::cli::load_json(entry.path());
    CHECK(cfg["version"] == 1);
    ++seen;
  }
  CHECK(seen >= 5);
}
