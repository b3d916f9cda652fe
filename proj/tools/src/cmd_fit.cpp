#include <optional>
#include <ostream>
#include <sstream>

#include <trimfit/error.hpp>
#include <trimfit/gd_ilts.hpp>
#include <trimfit/ilts.hpp>

#include "app.hpp"
#include "config.hpp"
#include "schema.hpp"

namespace trimfit::cli {

namespace {

struct FitOptions {
  std::string dataset;
  double tau = 1.0;
  std::string theta0;
  std::string theta0_file;
  std::size_t max_rounds = 100;
  double tol = 1e-10;
  std::string rank_policy = "fail";
  std::string truth;
  bool gd = false;
  std::optional<double> eta;
  std::string schedule = "fixed";
  std::size_t steps = 10;
  double w = 10.0;
  double c_u = 1.0;
  std::string out_dir = ".";
  std::string trace = "trace.csv";
  std::string summary = "summary.json";
};

int run_fit(const FitOptions& opt, Io& io) {
  const Dataset data = read_dataset_csv(std::filesystem::path(opt.dataset));
  std::optional<GroundTruth> truth;
  if (!opt.truth.empty()) truth = read_truth_json(opt.truth);

  Vector theta0 = Vector::Zero(static_cast<Eigen::Index>(data.d()));
  if (!opt.theta0.empty()) theta0 = to_vector(parse_number_list(opt.theta0));
  if (!opt.theta0_file.empty()) theta0 = read_vector_file(opt.theta0_file);
  if (static_cast<std::size_t>(theta0.size()) != data.d()) {
    throw InvalidArgument("theta0 has " + std::to_string(theta0.size()) + " entries, dataset has d = " +
                          std::to_string(data.d()));
  }

  SolverTrace trace;
  std::string summary;
  if (opt.gd) {
    GdConfig cfg;
    cfg.tau = opt.tau;
    cfg.max_rounds = opt.max_rounds;
    cfg.tol = opt.tol;
    cfg.eta = opt.eta;
    cfg.schedule = parse_schedule(opt.schedule);
    cfg.fixed_steps = opt.steps;
    cfg.w = opt.w;
    cfg.c_u = opt.c_u;
    trace = gd_ilts_run(data, theta0, cfg, truth ? &*truth : nullptr);
    summary = trace_summary_json(trace, cfg);
  } else {
    IltsConfig cfg;
    cfg.tau = opt.tau;
    cfg.max_rounds = opt.max_rounds;
    cfg.tol = opt.tol;
    cfg.rank_policy = parse_rank_policy(opt.rank_policy);
    trace = ilts_run(data, theta0, cfg, truth ? &*truth : nullptr);
    summary = trace_summary_json(trace, cfg);
  }
  require_valid(json::parse(summary), "trace-summary");

  const std::filesystem::path dir(opt.out_dir);
  std::ostringstream csv;
  write_trace_csv(csv, trace);
  write_text_file(dir / opt.trace, csv.str());
  write_text_file(dir / opt.summary, summary);

  io.out << "trace: " << (dir / opt.trace).string() << "\n";
  io.out << "summary: " << (dir / opt.summary).string() << "\n";
  io.out << "rounds: " << trace.rounds_used << (trace.converged ? " (converged)" : " (not converged)")
         << "\n";
  if (!trace.dist_to_nearest.empty()) {
    io.out << "dist_to_nearest: " << format_double(trace.dist_to_nearest.back()) << "\n";
  }
  return trace.converged ? kSuccess : kNotConverged;
}

}  // namespace

Command add_fit(CLI::App& root) {
  auto opt = std::make_shared<FitOptions>();
  CLI::App* sub = root.add_subcommand("fit", "Recover one component with ILTS or GD-ILTS");
  sub->add_option("dataset", opt->dataset, "Dataset CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--tau", opt->tau, "Retained fraction in (0, 1]")->capture_default_str();
  auto* inline_theta = sub->add_option("--theta0", opt->theta0, "Initial iterate, comma separated");
  sub->add_option("--theta0-file", opt->theta0_file, "Initial iterate from a file")
      ->check(CLI::ExistingFile)
      ->excludes(inline_theta);
  sub->add_option("--max-rounds", opt->max_rounds, "Round limit T")->capture_default_str();
  sub->add_option("--tol", opt->tol, "Step-norm tolerance")->capture_default_str();
  sub->add_option("--rank-policy", opt->rank_policy, "fail or min-norm")->capture_default_str();
  sub->add_option("--truth", opt->truth, "Ground-truth sidecar for distance tracking")
      ->check(CLI::ExistingFile);
  sub->add_flag("--gd", opt->gd, "Use gradient steps instead of exact least squares");
  sub->add_option("--eta", opt->eta, "GD step size (default 1/L per round)");
  sub->add_option("--schedule", opt->schedule, "fixed or adaptive")->capture_default_str();
  sub->add_option("--steps", opt->steps, "Inner steps M for the fixed schedule")->capture_default_str();
  sub->add_option("--w", opt->w, "Ranking cost for the adaptive schedule")->capture_default_str();
  sub->add_option("--c-u", opt->c_u, "Stopping-time constant")->capture_default_str();
  sub->add_option("--out-dir", opt->out_dir, "Output directory")->capture_default_str();
  sub->add_option("--trace", opt->trace, "Trace CSV file name")->capture_default_str();
  sub->add_option("--summary", opt->summary, "Summary JSON file name")->capture_default_str();
  return {sub, [opt](Io& io) { return run_fit(*opt, io); }};
}

}  // namespace trimfit::cli
