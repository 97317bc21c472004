// nesskubo: steady states and conductivities of damped lattice fermions.
//
//   nesskubo <command> --config FILE [--out FILE] [--format csv|json] [--threads N]

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "nesskubo/runner.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw nesskubo::ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace nesskubo;

  CLI::App app{"Dissipative steady states, currents and Kubo conductivities of lattice fermions"};
  std::string command_name, config_path, out_path, format_name;
  int threads = 1;
  bool verbose = false, quiet = false;

  std::vector<std::string> commands;
  for (const auto& [_, name] : kCommandNames) commands.emplace_back(name);
  app.add_option("command", command_name, "What to compute")
      ->required()
      ->check(CLI::IsMember(commands));
  app.add_option("--config", config_path, "Configuration file")->required();
  app.add_option("--out", out_path, "Output file (default: stdout)");
  app.add_option("--format", format_name, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--threads", threads, "Worker threads for sweeps")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  if (verbose) log::set_level(log::Level::info);
  if (quiet) log::set_level(log::Level::silent);

  try {
    RunConfig cfg = parse_config(read_file(config_path), enum_from(command_name, kCommandNames));
    if (!format_name.empty()) cfg.format = format_name == "json" ? OutputFormat::json : OutputFormat::csv;
    if (!out_path.empty()) cfg.output_path = out_path;

    log::info("running ", command_name, " with ", threads, " thread(s)");
    const Table table = run(cfg, threads);

    std::ofstream file;
    if (!cfg.output_path.empty()) {
      file.open(cfg.output_path);
      if (!file) throw ConfigError("cannot write '" + cfg.output_path + "'");
    }
    std::ostream& os = cfg.output_path.empty() ? std::cout : file;
    if (cfg.format == OutputFormat::json)
      write_json(os, table);
    else
      write_csv(os, table);
    return 0;
  } catch (const NumericalError& e) {
    std::cerr << "nesskubo: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConfigError& e) {
    std::cerr << "nesskubo: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::logic_error& e) {
    // ParameterError, RangeError, UnsupportedOperation: invalid input
    std::cerr << "nesskubo: invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "nesskubo: " << e.what() << '\n';
    return kExitNumerical;
  }
}
