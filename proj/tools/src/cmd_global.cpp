#include <optional>
#include <ostream>
#include <sstream>

#include <trimfit/error.hpp>
#include <trimfit/global_ilts.hpp>
#include <trimfit/parallel.hpp>

#include "app.hpp"
#include "config.hpp"
#include "schema.hpp"
#include "solver_config.hpp"

namespace trimfit::cli {

namespace {

struct GlobalOptions {
  std::string dataset;
  std::string config;
  std::size_t m = 0;
  std::string tau;
  bool tau_grid = false;
  double tau_grid_c = 0.9;
  std::optional<double> delta;
  double target_accuracy = 1e-6;
  std::optional<double> radius;
  std::size_t budget = 1000;
  double epsilon = 0.5;
  std::uint64_t seed = 0;
  std::size_t max_rounds = 50;
  double tol = 1e-10;
  std::string subspace;
  std::string truth;
  std::string out_dir = ".";
  std::string report = "report.json";
  std::string candidates = "candidates.csv";
};

GlobalConfig build_config(const GlobalOptions& opt, const CLI::App& sub) {
  GlobalConfig cfg;
  if (!opt.config.empty()) {
    const json root = load_json(opt.config);
    check_version(root, "");
    json body = root;
    if (!body.contains("m") && opt.m > 0) body["m"] = opt.m;
    cfg = parse_global_config(body, "");
  }
  auto given = [&](const char* name) { return sub.count(name) > 0; };
  if (given("--m")) cfg.m = opt.m;
  if (given("--tau")) cfg.tau_list = parse_number_list(opt.tau);
  if (given("--tau-grid")) cfg.tau_grid_search = opt.tau_grid;
  if (given("--tau-grid-c")) cfg.tau_grid_c = opt.tau_grid_c;
  if (given("--delta")) cfg.delta = opt.delta;
  if (given("--target-accuracy")) cfg.target_accuracy = opt.target_accuracy;
  if (given("--radius")) cfg.radius = opt.radius;
  if (given("--budget")) cfg.candidate_budget = opt.budget;
  if (given("--epsilon")) cfg.epsilon_net = opt.epsilon;
  if (given("--seed")) cfg.seed = opt.seed;
  if (given("--max-rounds")) cfg.ilts_max_rounds = opt.max_rounds;
  if (given("--tol")) cfg.ilts_tol = opt.tol;
  if (opt.config.empty() && !given("--m")) throw InvalidArgument("--m is required without --config");
  cfg.threads = threads_from_env();
  cfg.validate();
  return cfg;
}

int run_global(const GlobalOptions& opt, const CLI::App& sub, Io& io) {
  const GlobalConfig cfg = build_config(opt, sub);
  const Dataset data = read_dataset_csv(std::filesystem::path(opt.dataset));
  std::optional<GroundTruth> truth;
  if (!opt.truth.empty()) truth = read_truth_json(opt.truth);
  std::optional<SubspaceEstimate> basis;
  if (!opt.subspace.empty()) {
    basis = SubspaceEstimate::external(read_matrix_csv(opt.subspace));
    basis->validate(1e-8);
  }

  const RecoveryReport report = global_ilts(data, cfg, basis ? &*basis : nullptr, truth ? &*truth : nullptr);
  const std::string text = report_to_json(report, cfg);
  require_valid(json::parse(text), "recovery");

  const std::filesystem::path dir(opt.out_dir);
  std::ostringstream csv;
  write_candidates_csv(csv, report);
  write_text_file(dir / opt.report, text);
  write_text_file(dir / opt.candidates, csv.str());

  io.out << "report: " << (dir / opt.report).string() << "\n";
  io.out << "candidates: " << (dir / opt.candidates).string() << "\n";
  std::size_t recovered = 0;
  for (bool r : report.recovered) recovered += r ? 1 : 0;
  io.out << "recovered: " << recovered << "/" << cfg.m << "\n";
  if (report.radius_heuristic) io.out << "radius: " << format_double(report.radius) << " (heuristic)\n";
  if (auto eps = report.epsilon_recovery_value()) io.out << "epsilon_recovery: " << format_double(*eps) << "\n";
  return report.partial ? kPartialRecovery : kSuccess;
}

}  // namespace

Command add_global(CLI::App& root) {
  auto opt = std::make_shared<GlobalOptions>();
  CLI::App* sub = root.add_subcommand("global", "Recover all components with Global-ILTS");
  sub->add_option("dataset", opt->dataset, "Dataset CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--config", opt->config, "JSON config; explicit flags override it")
      ->check(CLI::ExistingFile);
  sub->add_option("--m", opt->m, "Number of components");
  sub->add_option("--tau", opt->tau, "Retained fraction per component, comma separated");
  sub->add_flag("--tau-grid", opt->tau_grid, "Search tau on the grid {1, c, c^2, ...}");
  sub->add_option("--tau-grid-c", opt->tau_grid_c, "Grid ratio c")->capture_default_str();
  sub->add_option("--delta", opt->delta, "Acceptance residual threshold");
  sub->add_option("--target-accuracy", opt->target_accuracy, "Sets the default delta")
      ->capture_default_str();
  sub->add_option("--radius", opt->radius, "Candidate sphere radius");
  sub->add_option("--budget", opt->budget, "Candidates per component")->capture_default_str();
  sub->add_option("--epsilon", opt->epsilon, "Net granularity")->capture_default_str();
  sub->add_option("--seed", opt->seed, "Candidate seed")->capture_default_str();
  sub->add_option("--max-rounds", opt->max_rounds, "ILTS rounds per candidate")->capture_default_str();
  sub->add_option("--tol", opt->tol, "ILTS step tolerance")->capture_default_str();
  sub->add_option("--subspace", opt->subspace, "External basis CSV (d rows, one column per direction)")
      ->check(CLI::ExistingFile);
  sub->add_option("--truth", opt->truth, "Ground truth for the recovery metric")->check(CLI::ExistingFile);
  sub->add_option("--out-dir", opt->out_dir, "Output directory")->capture_default_str();
  sub->add_option("--report", opt->report, "Report JSON file name")->capture_default_str();
  sub->add_option("--candidates", opt->candidates, "Candidate CSV file name")->capture_default_str();
  return {sub, [opt, sub](Io& io) { return run_global(*opt, *sub, io); }};
}

}  // namespace trimfit::cli
