#include <algorithm>
#include <ostream>

#include <trimfit/diagnostics.hpp>
#include <trimfit/error.hpp>

#include "app.hpp"
#include "config.hpp"
#include "schema.hpp"

namespace trimfit::cli {

namespace {

struct DiagnoseOptions {
  std::string dataset;
  std::string truth;
  bool q_separation = false;
  std::size_t regularity_k = 0;
  std::string mode = "auto";
  std::size_t trials = 200;
  bool affine_error = false;
  std::string deltas = "0.05,0.1,0.2,0.4";
  std::size_t component = 0;
  std::optional<double> tau_j;
  std::size_t directions = 64;
  bool contraction_bound = false;
  double tau = 0.5;
  std::string theta0;
  std::size_t max_rounds = 30;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string report = "diagnostics.json";
};

json regularity_json(const RegularityEstimate& est, bool with_budget) {
  json j;
  j["k"] = est.k;
  j["psi_plus"] = est.psi_plus;
  j["psi_minus"] = est.psi_minus;
  j["mode"] = std::string(to_string(est.mode));
  if (est.mode == EstimateMode::sampled) {
    j["trials"] = est.trials;
    j["bound"] = "inner";
  }
  if (with_budget) j["budget"] = kExactSubsetBudget;
  j["subsets_evaluated"] = est.subsets_evaluated;
  return j;
}

int run_diagnose(const DiagnoseOptions& opt, Io& io) {
  const Dataset data = read_dataset_csv(std::filesystem::path(opt.dataset));
  const GroundTruth truth = read_truth_json(opt.truth);
  if (truth.n() != data.n() || static_cast<std::size_t>(truth.theta_star.rows()) != data.d()) {
    throw InvalidArgument("truth sidecar does not match the dataset shape");
  }
  const bool any = opt.q_separation || opt.regularity_k > 0 || opt.affine_error || opt.contraction_bound;

  json report;
  report["format"] = "trimfit-diagnostics";
  report["version"] = 1;
  report["seed"] = opt.seed;

  if (opt.q_separation || (!any && truth.m() >= 2)) {
    const QSeparation q = q_separation(truth.theta_star);
    report["q_separation"] = {{"q", q.q}, {"q_j", q.q_j}};
    io.out << "Q = " << format_double(q.q) << "\n";
    for (std::size_t j = 0; j < q.q_j.size(); ++j) {
      io.out << "Q_" << j << " = " << format_double(q.q_j[j]) << "\n";
    }
  }

  if (opt.regularity_k > 0) {
    RegularityEstimate est;
    const bool fits = binomial(data.n(), opt.regularity_k) <= kExactSubsetBudget;
    if (opt.mode == "exact" || (opt.mode == "auto" && fits)) {
      est = feature_regularity_exact(data.X(), opt.regularity_k);
    } else if (opt.mode == "sampled" || opt.mode == "auto") {
      est = feature_regularity_sampled(data.X(), opt.regularity_k, opt.trials, opt.seed);
    } else {
      throw InvalidArgument("--mode must be exact, sampled or auto");
    }
    report["regularity"] = regularity_json(est, true);
    io.out << "psi+(" << est.k << ") = " << format_double(est.psi_plus) << "  psi-(" << est.k
           << ") = " << format_double(est.psi_minus) << "  [" << to_string(est.mode) << "]\n";
  }

  if (opt.affine_error) {
    const auto labels = clean_labels(truth);
    if (opt.component >= truth.m()) throw InvalidArgument("--component out of range");
    std::vector<double> tau(truth.m());
    for (std::size_t j = 0; j < truth.m(); ++j) tau[j] = 0.8 * truth.tau_star[j];
    if (opt.tau_j) tau[opt.component] = *opt.tau_j;
    json estimates = json::array();
    for (double delta : parse_number_list(opt.deltas)) {
      const auto est = affine_error_estimate(data.X(), labels, tau, opt.component, delta,
                                             opt.directions, opt.seed);
      estimates.push_back({{"delta", delta}, {"value", est.value}});
      io.out << "V(" << format_double(delta) << ") >= " << est.value << "\n";
    }
    report["affine_error"] = {{"component", opt.component},
                              {"tau_j", tau[opt.component]},
                              {"directions", opt.directions},
                              {"bound", "lower"},
                              {"estimates", estimates}};
  }

  if (opt.contraction_bound) {
    if (opt.theta0.empty()) throw InvalidArgument("--contraction-bound needs --theta0");
    const Vector theta0 = to_vector(parse_number_list(opt.theta0));
    IltsConfig cfg;
    cfg.tau = opt.tau;
    cfg.max_rounds = opt.max_rounds;
    const SolverTrace trace = ilts_run(data, theta0, cfg, &truth);
    const std::size_t j = nearest_component(theta0, truth.theta_star);
    ContractionCheckOptions t1;
    t1.seed = opt.seed;
    t1.directions = opt.directions;
    t1.trials = opt.trials;
    const auto rounds = contraction_bound_check(data, truth, trace, j, opt.tau, t1);
    json list = json::array();
    bool all = true;
    for (const auto& r : rounds) {
      all = all && r.holds;
      list.push_back({{"round", r.round},
                      {"observed", r.observed},
                      {"delta", r.delta},
                      {"affine_error", r.affine_error},
                      {"psi_plus", r.psi_plus},
                      {"psi_minus", r.psi_minus},
                      {"psi_plus_exact", r.psi_plus_exact},
                      {"psi_minus_exact", r.psi_minus_exact},
                      {"bound", r.bound},
                      {"holds", r.holds}});
    }
    report["contraction_bound"] = {{"component", j},
                          {"tau", opt.tau},
                          {"psi_plus_inflation", kPsiPlusInflation},
                          {"all_hold", all},
                          {"rounds", list}};
    io.out << "contraction bound: " << rounds.size() << " rounds checked, "
           << (all ? "all hold" : "VIOLATED") << "\n";
  }

  require_valid(report, "diagnostics");
  const auto path = std::filesystem::path(opt.out_dir) / opt.report;
  write_text_file(path, report.dump(2) + "\n");
  io.out << "report: " << path.string() << "\n";
  return kSuccess;
}

}  // namespace

Command add_diagnose(CLI::App& root) {
  auto opt = std::make_shared<DiagnoseOptions>();
  CLI::App* sub = root.add_subcommand("diagnose", "Structural diagnostics of an instance");
  sub->add_option("dataset", opt->dataset, "Dataset CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--truth", opt->truth, "Ground-truth sidecar")->required()->check(CLI::ExistingFile);
  sub->add_flag("--q-separation", opt->q_separation, "Component separation Q and Q_j");
  sub->add_option("--regularity", opt->regularity_k, "Feature regularity at subset size k");
  sub->add_option("--mode", opt->mode, "exact, sampled or auto")->capture_default_str();
  sub->add_option("--trials", opt->trials, "Random subsets for sampled estimates")->capture_default_str();
  sub->add_flag("--affine-error", opt->affine_error, "Affine error lower bounds");
  sub->add_option("--deltas", opt->deltas, "Ratios for --affine-error")->capture_default_str();
  sub->add_option("--component", opt->component, "Target component")->capture_default_str();
  sub->add_option("--tau-j", opt->tau_j, "Retained fraction for the target (default 0.8 tau*_j)");
  sub->add_option("--directions", opt->directions, "Random direction pairs")->capture_default_str();
  sub->add_flag("--contraction-bound", opt->contraction_bound, "Check observed contraction against the assembled bound");
  sub->add_option("--tau", opt->tau, "ILTS retained fraction for --contraction-bound")->capture_default_str();
  sub->add_option("--theta0", opt->theta0, "ILTS start for --contraction-bound");
  sub->add_option("--max-rounds", opt->max_rounds, "ILTS rounds for --contraction-bound")->capture_default_str();
  sub->add_option("--seed", opt->seed, "Sampling seed")->capture_default_str();
  sub->add_option("--out-dir", opt->out_dir, "Output directory")->capture_default_str();
  sub->add_option("--report", opt->report, "Report JSON file name")->capture_default_str();
  return {sub, [opt](Io& io) { return run_diagnose(*opt, io); }};
}

}  // namespace trimfit::cli
