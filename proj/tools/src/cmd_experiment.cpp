#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include <trimfit/diagnostics.hpp>
#include <trimfit/error.hpp>
#include <trimfit/gd_ilts.hpp>
#include <trimfit/global_ilts.hpp>
#include <trimfit/parallel.hpp>

#include "app.hpp"
#include "config.hpp"
#include "schema.hpp"
#include "solver_config.hpp"

namespace trimfit::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class SolverKind { ilts, gd_ilts, global, none };

SolverKind parse_kind(const std::string& name) {
  if (name == "ilts") return SolverKind::ilts;
  if (name == "gd-ilts") return SolverKind::gd_ilts;
  if (name == "global") return SolverKind::global;
  if (name == "none") return SolverKind::none;
  throw InvalidArgument("field 'solver.kind' must be ilts, gd-ilts, global or none");
}

struct Theta0Spec {
  enum class Kind { zero, interpolate, vector, random } kind = Kind::zero;
  std::size_t from = 0;
  std::size_t toward = 0;
  double fraction = 0.0;
  std::vector<double> values;
  double scale = 1.0;
};

struct Experiment {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t repeats = 1;
  std::optional<GenerativeModel> model;
  std::string dataset_path;
  std::string truth_path;
  SolverKind kind = SolverKind::none;
  IltsConfig ilts;
  GdConfig gd;
  std::optional<GlobalConfig> global;
  Theta0Spec theta0;
  std::vector<std::string> diagnostics;
  std::string output_dir;
  json echo;
};

Theta0Spec parse_theta0(const json& solver) {
  Theta0Spec spec;
  if (!solver.contains("theta0")) return spec;
  const json& t = solver.at("theta0");
  if (t.is_array()) {
    spec.kind = Theta0Spec::Kind::vector;
    spec.values = get_number_list(t, "solver.theta0");
  } else if (t.contains("from")) {
    spec.kind = Theta0Spec::Kind::interpolate;
    spec.from = get_count(t, "from", "solver.theta0");
    spec.toward = get_count(t, "toward", "solver.theta0");
    spec.fraction = get_number(t, "fraction", "solver.theta0");
  } else if (t.contains("random_scale")) {
    spec.kind = Theta0Spec::Kind::random;
    spec.scale = get_number(t, "random_scale", "solver.theta0");
  } else {
    throw InvalidArgument("field 'solver.theta0' must be a list, {from, toward, fraction} or {random_scale}");
  }
  return spec;
}

Experiment parse_experiment(const json& root) {
  check_version(root, "");
  Experiment e;
  e.echo = root;
  e.name = get_string_or(root, "name", "", "");
  if (e.name.empty()) throw InvalidArgument("missing required field 'name'");
  e.repeats = get_count_or(root, "repeats", 1, "");
  if (e.repeats < 1) throw InvalidArgument("field 'repeats' must be at least 1");
  const bool has_model = root.contains("model");
  const bool has_dataset = root.contains("dataset");
  if (has_model == has_dataset) {
    throw InvalidArgument("exactly one of 'model' and 'dataset' must be present");
  }
  if (has_model) {
    e.model = parse_generative(root);
    e.seed = e.model->seed;
  } else {
    e.dataset_path = get_string_or(root, "dataset", "", "");
    e.truth_path = get_string_or(root, "truth", "", "");
    e.seed = get_count_or(root, "seed", 0, "");
  }
  const json& solver = require_field(root, "solver", "");
  e.kind = parse_kind(get_string_or(solver, "kind", "", "solver"));
  switch (e.kind) {
    case SolverKind::ilts: e.ilts = parse_ilts_config(solver, "solver"); break;
    case SolverKind::gd_ilts: e.gd = parse_gd_config(solver, "solver"); break;
    case SolverKind::global: e.global = parse_global_config(solver, "solver"); break;
    case SolverKind::none: break;
  }
  e.theta0 = parse_theta0(solver);
  if (root.contains("diagnostics")) {
    for (const auto& d : root.at("diagnostics")) {
      if (!d.is_string()) throw InvalidArgument("field 'diagnostics' must list names");
      const auto name = d.get<std::string>();
      if (name != "q-separation" && name != "subspace-distance" && name != "contraction-bound") {
        throw InvalidArgument("unknown diagnostic '" + name + "'");
      }
      e.diagnostics.push_back(name);
    }
  }
  e.output_dir = get_string_or(root, "output_dir", "", "");
  return e;
}

struct Row {
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string message;
  std::optional<std::size_t> rounds;
  std::optional<bool> converged;
  double final_error = kNaN;
  double max_ratio = kNaN;
  double epsilon_recovery = kNaN;
  std::optional<std::size_t> recovered;
  std::optional<std::size_t> candidates;
  double q = kNaN;
  double subspace_distance = kNaN;
  std::optional<bool> bound_holds;
  std::vector<double> dist_curve;
  std::string trace_csv;
  std::string report_json;
  std::string candidates_csv;
};

bool wants(const Experiment& e, std::string_view name) {
  return std::find(e.diagnostics.begin(), e.diagnostics.end(), name) != e.diagnostics.end();
}

Vector initial_theta(const Experiment& e, const Dataset& data, const GroundTruth* truth,
                     std::uint64_t seed) {
  const auto d = static_cast<Eigen::Index>(data.d());
  switch (e.theta0.kind) {
    case Theta0Spec::Kind::zero: return Vector::Zero(d);
    case Theta0Spec::Kind::vector: {
      Vector v = to_vector(e.theta0.values);
      if (v.size() != d) throw InvalidArgument("solver.theta0 length does not match d");
      return v;
    }
    case Theta0Spec::Kind::interpolate: {
      if (truth == nullptr) throw InvalidArgument("solver.theta0 {from, toward} needs ground truth");
      if (e.theta0.from >= truth->m() || e.theta0.toward >= truth->m()) {
        throw InvalidArgument("solver.theta0 component index out of range");
      }
      const Vector a = truth->theta_star.col(static_cast<Eigen::Index>(e.theta0.from));
      const Vector b = truth->theta_star.col(static_cast<Eigen::Index>(e.theta0.toward));
      return a + e.theta0.fraction * (b - a);
    }
    case Theta0Spec::Kind::random: {
      Rng rng(mix_seed(seed, 7));
      Vector v(d);
      for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.normal();
      return e.theta0.scale * v.normalized();
    }
  }
  return Vector::Zero(d);
}

std::string csv_text(const std::function<void(std::ostream&)>& write) {
  std::ostringstream out;
  write(out);
  return out.str();
}

void run_single(const Experiment& e, std::size_t repeat, std::size_t inner_threads, Row& row) {
  row.repeat = repeat;
  row.seed = e.seed + repeat;
  Dataset data;
  std::optional<GroundTruth> truth;
  if (e.model) {
    Instance inst = generate_mlrc(e.model->spec, e.model->corruption, e.model->n, row.seed);
    data = std::move(inst.data);
    truth = std::move(inst.truth);
  } else {
    data = read_dataset_csv(std::filesystem::path(e.dataset_path));
    if (!e.truth_path.empty()) truth = read_truth_json(e.truth_path);
  }
  const GroundTruth* gt = truth ? &*truth : nullptr;

  if (wants(e, "q-separation")) {
    if (!gt) throw InvalidArgument("q-separation needs ground truth");
    row.q = q_separation(gt->theta_star).q;
  }
  if (wants(e, "subspace-distance")) {
    if (!gt) throw InvalidArgument("subspace-distance needs ground truth");
    const auto est = estimate_subspace(data, gt->m());
    row.subspace_distance = subspace_distance(est, orthonormalize(gt->theta_star));
  }

  if (e.kind == SolverKind::ilts || e.kind == SolverKind::gd_ilts) {
    const Vector theta0 = initial_theta(e, data, gt, row.seed);
    const SolverTrace trace = e.kind == SolverKind::ilts ? ilts_run(data, theta0, e.ilts, gt)
                                                        : gd_ilts_run(data, theta0, e.gd, gt);
    row.rounds = trace.rounds_used;
    row.converged = trace.converged;
    row.trace_csv = csv_text([&](std::ostream& out) { write_trace_csv(out, trace); });
    if (gt) {
      row.dist_curve = trace.dist_to_nearest;
      const std::size_t j = e.theta0.kind == Theta0Spec::Kind::interpolate
                                ? e.theta0.from
                                : nearest_component(trace.final_theta(), gt->theta_star);
      const Vector target = gt->theta_star.col(static_cast<Eigen::Index>(j));
      row.final_error = (trace.final_theta() - target).norm();
      const auto ratios = contraction_ratio(trace, *gt, j);
      if (!ratios.empty()) row.max_ratio = *std::max_element(ratios.begin(), ratios.end());
      if (wants(e, "contraction-bound")) {
        if (e.kind != SolverKind::ilts) throw InvalidArgument("contraction diagnostic needs solver ilts");
        ContractionCheckOptions opt;
        opt.seed = row.seed;
        bool all = true;
        for (const auto& r : contraction_bound_check(data, *gt, trace, j, e.ilts.tau, opt)) all = all && r.holds;
        row.bound_holds = all;
      }
    }
  } else if (e.kind == SolverKind::global) {
    GlobalConfig cfg = *e.global;
    cfg.seed = mix_seed(row.seed, 3);
    cfg.threads = inner_threads;
    const RecoveryReport report = global_ilts(data, cfg, nullptr, gt);
    row.report_json = report_to_json(report, cfg);
    require_valid(json::parse(row.report_json), "recovery");
    row.candidates_csv = csv_text([&](std::ostream& out) { write_candidates_csv(out, report); });
    std::size_t recovered = 0, tried = 0;
    for (std::size_t j = 0; j < report.recovered.size(); ++j) {
      recovered += report.recovered[j] ? 1 : 0;
      tried += report.candidates_tried[j];
    }
    row.recovered = recovered;
    row.candidates = tried;
    if (auto eps = report.epsilon_recovery_value()) row.epsilon_recovery = *eps;
  }
}

std::string num(double v) { return std::isnan(v) ? "" : format_double(v); }

template <typename T>
std::string opt_text(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_same_v<T, bool>) {
    return *v ? "1" : "0";
  } else {
    return std::to_string(*v);
  }
}

std::string quote(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += "\"\"";
    else if (c == '\n') out += ' ';
    else out += c;
  }
  return out + "\"";
}

/// Linear-interpolation quantile of a sorted, non-empty sample.
double quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct Stats {
  std::size_t count = 0;
  double median = kNaN, q1 = kNaN, q3 = kNaN;
};

Stats stats_of(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
               values.end());
  Stats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.median = quantile(values, 0.5);
  s.q1 = quantile(values, 0.25);
  s.q3 = quantile(values, 0.75);
  return s;
}

std::string results_csv(const std::vector<Row>& rows) {
  std::ostringstream out;
  out << "repeat,seed,status,rounds,converged,final_error,max_ratio,epsilon_recovery,recovered,"
         "candidates,q,subspace_distance,bound_holds,message\n";
  for (const Row& r : rows) {
    out << r.repeat << ',' << r.seed << ',' << (r.ok ? "ok" : "error") << ',' << opt_text(r.rounds)
        << ',' << opt_text(r.converged) << ',' << num(r.final_error) << ',' << num(r.max_ratio) << ','
        << num(r.epsilon_recovery) << ',' << opt_text(r.recovered) << ',' << opt_text(r.candidates)
        << ',' << num(r.q) << ',' << num(r.subspace_distance) << ',' << opt_text(r.bound_holds)
        << ',' << quote(r.message) << '\n';
  }
  return out.str();
}

std::string summary_csv(const Experiment& e, const std::vector<Row>& rows) {
  std::size_t failed = 0, converged = 0, holds = 0;
  for (const Row& r : rows) {
    failed += r.ok ? 0 : 1;
    converged += r.converged.value_or(false) ? 1 : 0;
    holds += r.bound_holds.value_or(false) ? 1 : 0;
  }
  auto column = [&](auto getter) {
    std::vector<double> v;
    for (const Row& r : rows) {
      if (r.ok) v.push_back(getter(r));
    }
    return stats_of(v);
  };
  const std::vector<std::pair<std::string, Stats>> metrics{
      {"rounds", column([](const Row& r) { return r.rounds ? static_cast<double>(*r.rounds) : kNaN; })},
      {"final_error", column([](const Row& r) { return r.final_error; })},
      {"max_ratio", column([](const Row& r) { return r.max_ratio; })},
      {"epsilon_recovery", column([](const Row& r) { return r.epsilon_recovery; })},
      {"subspace_distance", column([](const Row& r) { return r.subspace_distance; })},
  };
  std::ostringstream out;
  out << "name,repeats,failed,converged,bound_holds";
  for (const auto& [name, s] : metrics) {
    out << ',' << name << "_count," << name << "_median," << name << "_q1," << name << "_q3," << name
        << "_iqr";
  }
  out << '\n' << quote(e.name) << ',' << rows.size() << ',' << failed << ',' << converged << ',' << holds;
  for (const auto& [name, s] : metrics) {
    out << ',' << s.count << ',' << num(s.median) << ',' << num(s.q1) << ',' << num(s.q3) << ','
        << num(s.q3 - s.q1);
  }
  out << '\n';
  return out.str();
}

std::string curves_csv(const std::vector<Row>& rows) {
  std::size_t longest = 0;
  for (const Row& r : rows) longest = std::max(longest, r.dist_curve.size());
  std::ostringstream out;
  out << "iterate,count,dist_median,dist_q1,dist_q3\n";
  for (std::size_t t = 0; t < longest; ++t) {
    std::vector<double> v;
    for (const Row& r : rows) {
      if (t < r.dist_curve.size()) v.push_back(r.dist_curve[t]);
    }
    const Stats s = stats_of(v);
    out << t << ',' << s.count << ',' << num(s.median) << ',' << num(s.q1) << ',' << num(s.q3) << '\n';
  }
  return out.str();
}

std::string repeat_name(std::size_t repeat, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "repeat_%03zu.%s", repeat, ext);
  return buf;
}

struct ExperimentOptions {
  std::string config;
  std::string out_dir;
};

int run_experiment(const ExperimentOptions& opt, Io& io) {
  const Experiment e = parse_experiment(load_json(opt.config));
  std::filesystem::path dir = !opt.out_dir.empty() ? std::filesystem::path(opt.out_dir)
                              : !e.output_dir.empty() ? std::filesystem::path(e.output_dir)
                                                      : std::filesystem::path("experiment-" + e.name);

  const std::size_t threads = threads_from_env();
  const bool parallel_repeats = threads > 1 && e.repeats > 1;
  std::vector<Row> rows(e.repeats);
  parallel_for(e.repeats, parallel_repeats ? threads : 0, [&](std::size_t r) {
    try {
      run_single(e, r, parallel_repeats ? 0 : threads, rows[r]);
    } catch (const std::exception& ex) {
      rows[r].ok = false;
      rows[r].message = ex.what();
    }
  });

  std::vector<std::string> files{"results.csv", "summary.csv"};
  write_text_file(dir / "results.csv", results_csv(rows));
  write_text_file(dir / "summary.csv", summary_csv(e, rows));
  if (e.kind == SolverKind::ilts || e.kind == SolverKind::gd_ilts) {
    write_text_file(dir / "curves.csv", curves_csv(rows));
    files.emplace_back("curves.csv");
    for (const Row& r : rows) {
      if (r.trace_csv.empty()) continue;
      const std::string name = "traces/" + repeat_name(r.repeat, "csv");
      write_text_file(dir / name, r.trace_csv);
      files.push_back(name);
    }
  } else if (e.kind == SolverKind::global) {
    for (const Row& r : rows) {
      if (r.report_json.empty()) continue;
      const std::string report = "reports/" + repeat_name(r.repeat, "json");
      const std::string cands = "candidates/" + repeat_name(r.repeat, "csv");
      write_text_file(dir / report, r.report_json);
      write_text_file(dir / cands, r.candidates_csv);
      files.push_back(report);
      files.push_back(cands);
    }
  }

  std::size_t failed = 0;
  for (const Row& r : rows) failed += r.ok ? 0 : 1;
  static const char* kKindNames[] = {"ilts", "gd-ilts", "global", "none"};
  json manifest;
  manifest["format"] = "trimfit-experiment";
  manifest["version"] = 1;
  manifest["name"] = e.name;
  manifest["generator"] = std::string(kGeneratorVersion);
  manifest["solver"] = kKindNames[static_cast<int>(e.kind)];
  manifest["repeats"] = e.repeats;
  manifest["failed_repeats"] = failed;
  manifest["files"] = files;
  manifest["config"] = e.echo;
  require_valid(manifest, "experiment");
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

  io.out << "experiment " << e.name << ": " << e.repeats - failed << "/" << e.repeats
         << " repeats ok\n";
  io.out << "output: " << dir.string() << "\n";
  for (const Row& r : rows) {
    if (!r.ok) io.err << "repeat " << r.repeat << " failed: " << r.message << "\n";
  }
  return failed > 0 ? kError : kSuccess;
}

}  // namespace

Command add_experiment(CLI::App& root) {
  auto opt = std::make_shared<ExperimentOptions>();
  CLI::App* sub = root.add_subcommand("experiment", "Run a scripted, repeated experiment");
  sub->add_option("config", opt->config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  sub->add_option("--out-dir", opt->out_dir, "Override the config's output_dir");
  return {sub, [opt](Io& io) { return run_experiment(*opt, io); }};
}

}  // namespace trimfit::cli
