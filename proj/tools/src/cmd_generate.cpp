#include <ostream>
#include <sstream>

#include <trimfit/model.hpp>

#include "app.hpp"
#include "config.hpp"
#include "schema.hpp"

namespace trimfit::cli {

namespace {

struct GenerateOptions {
  std::string config;
  std::string out_dir = ".";
  std::string dataset = "dataset.csv";
  std::string truth = "truth.json";
};

int run_generate(const GenerateOptions& opt, Io& io) {
  const json root = load_json(opt.config);
  check_version(root, "");
  const GenerativeModel model = parse_generative(root);
  const Instance inst = generate_mlrc(model.spec, model.corruption, model.n, model.seed);

  const std::string truth_text = truth_to_json(inst.truth);
  require_valid(json::parse(truth_text), "truth");

  const std::filesystem::path dir(opt.out_dir);
  const auto data_path = dir / opt.dataset;
  const auto truth_path = dir / opt.truth;
  std::ostringstream csv;
  write_dataset_csv(csv, inst.data);
  write_text_file(data_path, csv.str());
  write_text_file(truth_path, truth_text);

  io.out << "dataset: " << data_path.string() << "\n";
  io.out << "truth: " << truth_path.string() << "\n";
  io.out << "tau_star:";
  for (double t : inst.truth.tau_star) io.out << " " << format_double(t);
  io.out << "\ngamma_star: " << format_double(inst.truth.gamma_star()) << "\n";
  return kSuccess;
}

}  // namespace

Command add_generate(CLI::App& root) {
  auto opt = std::make_shared<GenerateOptions>();
  CLI::App* sub = root.add_subcommand("generate", "Draw a seeded MLR-C dataset and its ground truth");
  sub->add_option("config", opt->config, "JSON model config")->required();
  sub->add_option("--out-dir", opt->out_dir, "Output directory")->capture_default_str();
  sub->add_option("--dataset", opt->dataset, "Dataset file name")->capture_default_str();
  sub->add_option("--truth", opt->truth, "Ground-truth file name")->capture_default_str();
  return {sub, [opt](Io& io) { return run_generate(*opt, io); }};
}

}  // namespace trimfit::cli
