#include <cstdint>
#include <string>

#include "CLI11.hpp"
#include "cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Trigonometric Calogero-Moser flows and KP tau-function checks"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int jobs = 1;
  const char* names[][2] = {{"simulate", "integrate the configured flows and write trajectory tables"},
                            {"verify", "run the named verification checks over seeded ensembles"},
                            {"tau-compare", "compare integrated pole positions with the determinant formula"},
                            {"backlund", "solve the Backlund map for each configured mu"}};
  std::vector<CLI::App*> subs;
  std::vector<CLI::Option*> seed_opts, out_opts;
  for (const auto& [name, help] : names) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON run configuration")->required();
    out_opts.push_back(sub->add_option("--out", out, "output directory (overrides output_dir)"));
    seed_opts.push_back(sub->add_option("--seed", seed, "run seed (overrides seed)"));
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kpcm::cli::kExitConfig;
  }

  kpcm::cli::configure_logging();
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    kpcm::cli::CommandOptions opts;
    opts.config_path = config;
    opts.jobs = jobs;
    if (out_opts[i]->count()) opts.out_dir = out;
    if (seed_opts[i]->count()) opts.seed = seed;
    return kpcm::cli::run_command(subs[i]->get_name(), opts);
  }
  return kpcm::cli::kExitConfig;
}
