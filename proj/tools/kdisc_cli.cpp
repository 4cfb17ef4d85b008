#include "kdisc/experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel discrepancy experiments"};
  std::string subcommand;
  std::string config_path;
  std::string out_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  long long reps = 0;
  app.add_option("subcommand", subcommand, "One of: " + join(kdisc::subcommands()))->required();
  app.add_option("overrides", overrides, "key=value settings, applied after the config file");
  app.add_option("--config", config_path, "Flat key=value config file");
  auto* seed_opt = app.add_option("--seed", seed, "Root seed");
  auto* reps_opt = app.add_option("--reps", reps, "Replicate count")->check(CLI::PositiveNumber);
  app.add_option("--out", out_path, "CSV output path (default: standard output)");
  CLI11_PARSE(app, argc, argv);

  try {
    kdisc::Config cfg;
    if (!config_path.empty()) cfg = kdisc::Config::parse_file(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) throw kdisc::ConfigError("expected key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (*seed_opt) cfg.set("seed", std::to_string(seed));
    if (*reps_opt) cfg.set("reps", std::to_string(reps));
    if (cfg.empty()) throw kdisc::ConfigError("empty config: pass --config or key=value settings");

    std::ofstream file;
    if (!out_path.empty()) {
      file.open(out_path, std::ios::binary);
      if (!file) throw kdisc::ConfigError("cannot write " + out_path);
    }
    std::ostream& csv = out_path.empty() ? std::cout : file;
    const kdisc::RunSummary summary = kdisc::run_experiment(subcommand, cfg, csv);
    (out_path.empty() ? std::cerr : std::cout) << summary << '\n';
  } catch (const kdisc::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
