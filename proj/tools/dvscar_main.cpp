#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dvscar/commands.hpp"
#include "dvscar/errors.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace dvscar;
  CLI::App app{"Time-varying D-vine copulas with SCAR pair copulas"};
  app.set_config("--config", "", "INI or TOML file with flag values; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();

  cli::RunConfig cfg;
  std::string families = "N,C,G,SC,SG";
  app.add_option("--seed", cfg.seed, "Global random seed")->capture_default_str();
  app.add_option("--n-traj", cfg.n_traj, "Importance sampling trajectories per edge")->capture_default_str();
  app.add_option("--workers", cfg.workers, "Worker threads")->capture_default_str();
  app.add_option("--families", families, "Comma-separated candidate families from N, C, G, SC, SG")
      ->capture_default_str();
  app.add_option("--max-tv-tree", cfg.max_tv_tree, "Highest tree allowing time-varying edges (-1: all)")
      ->capture_default_str();
  app.add_option("--trunc-tree", cfg.trunc_tree, "Independence above this tree (-1: no truncation)")
      ->capture_default_str();

  auto* pit = app.add_subcommand("pit", "Rank-transform a raw panel to pseudo-uniforms");
  std::string pit_in, pit_out;
  pit->add_option("input", pit_in, "Raw panel CSV")->required();
  pit->add_option("output", pit_out, "Uniform panel CSV")->required();

  auto* sim = app.add_subcommand("simulate", "Simulate a uniform panel from a vine spec");
  std::string sim_spec, sim_out;
  std::optional<std::string> sim_tau;
  std::size_t sim_T = 1000;
  sim->add_option("spec", sim_spec, "Vine spec JSON")->required();
  sim->add_option("-T,--length", sim_T, "Number of observations")->capture_default_str();
  sim->add_option("-o,--out", sim_out, "Output panel CSV")->required();
  sim->add_option("--tau-out", sim_tau, "Optional CSV of the true tau paths");

  auto* fit = app.add_subcommand("fit", "Order variables and fit the D-vine tree by tree");
  std::string fit_data;
  cli::FitPaths fit_paths;
  fit->add_option("data", fit_data, "Uniform panel CSV")->required();
  fit->add_option("-o,--out", fit_paths.out, "Fit document JSON")->required();
  fit->add_option("--bic-out", fit_paths.bic_out, "CSV of cumulative BIC per tree");

  auto* smooth = app.add_subcommand("smooth", "Smoothed Kendall's tau paths of a fitted vine");
  std::string sm_fit, sm_data, sm_out;
  cli::SmoothOptions so;
  smooth->add_option("fit", sm_fit, "Fit document JSON")->required();
  smooth->add_option("data", sm_data, "Uniform panel CSV used for the fit")->required();
  smooth->add_option("-o,--out", sm_out, "Output tau CSV")->required();
  smooth->add_option("--edge", so.edges, "Tree-1 edge position(s); default all");
  smooth->add_flag("--implied", so.implied, "Add implied tau for non-adjacent variable pairs");
  smooth->add_option("--mc-reps", so.mc_reps, "Simulated draws per date for --implied")->capture_default_str();

  auto* mc = app.add_subcommand("mc", "Monte Carlo parameter recovery study");
  std::string mc_scenario, mc_out;
  std::optional<std::size_t> mc_R, mc_T;
  mc->add_option("scenario", mc_scenario, "Built-in scenario name or scenario JSON path")->required();
  mc->add_option("-R,--replications", mc_R, "Replications (default 50 or the file's R)");
  mc->add_option("-T,--length", mc_T, "Series length (default 1000 or the file's T)");
  mc->add_option("-o,--out", mc_out, "Report CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    cfg.families = cli::parse_families(families);
    cfg.validate();
    if (*pit) {
      cli::cmd_pit(pit_in, pit_out);
    } else if (*sim) {
      cli::cmd_simulate(sim_spec, sim_T, cfg, sim_out, sim_tau);
    } else if (*fit) {
      DvineFit f = cli::cmd_fit(fit_data, cfg, fit_paths, &std::cerr);
      std::cout << "total BIC " << f.total_bic << ", loglik " << f.loglik << ", parameters "
                << f.spec.parameter_count() << '\n';
    } else if (*smooth) {
      cli::cmd_smooth(sm_fit, sm_data, so, cfg, sm_out, &std::cerr);
    } else if (*mc) {
      McReport rep = cli::cmd_mc(mc_scenario, mc_R, mc_T, cfg, mc_out, &std::cerr);
      if (!rep.failure_rate_ok()) {
        std::cerr << "error: " << rep.failures << " of " << rep.R << " replications failed\n";
        for (const auto& m : rep.failure_messages) std::cerr << "  " << m << '\n';
        return kExitFailure;
      }
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return EXIT_SUCCESS;
}
