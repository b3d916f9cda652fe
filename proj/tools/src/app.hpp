#pragma once

#include <functional>
#include <iosfwd>
#include <memory>

#include <CLI11.hpp>

namespace trimfit::cli {

enum ExitCode : int {
  kSuccess = 0,
  kError = 1,
  kNotConverged = 2,
  kPartialRecovery = 3,
};

struct Io {
  std::ostream& out;
  std::ostream& err;
};

/// A registered subcommand and the action to run once it has parsed.
struct Command {
  CLI::App* app = nullptr;
  std::function<int(Io&)> run;
};

Command add_generate(CLI::App& root);
Command add_fit(CLI::App& root);
Command add_global(CLI::App& root);
Command add_diagnose(CLI::App& root);
Command add_experiment(CLI::App& root);

/// Entry point shared by main() and the tests. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace trimfit::cli
