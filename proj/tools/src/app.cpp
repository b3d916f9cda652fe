#include "app.hpp"

#include <ostream>
#include <vector>

#include <trimfit/error.hpp>
#include <trimfit/rng.hpp>

namespace trimfit::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"trimfit: robust mixed linear regression by iterative trimming"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("trimfit 0.1.0 (") + std::string(kGeneratorVersion) + ")");

  std::vector<Command> commands{add_generate(app), add_fit(app), add_global(app),
                                add_diagnose(app), add_experiment(app)};
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kSuccess : kError;
  }

  Io io{out, err};
  for (auto& command : commands) {
    if (!command.app->parsed()) continue;
    try {
      return command.run(io);
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return kError;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kError;
    }
  }
  return kError;
}

}  // namespace trimfit::cli
