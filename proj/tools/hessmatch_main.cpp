#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hessmatch/errors.hpp"
#include "hessmatch/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Coarse-grained potential training pipeline"};
  app.require_subcommand(1);

  std::string config_path, manifest_path, variant = "FM+AAp", out_dir = "out";
  long long seed = -1;
  int replicas = 0;

  CLI::App* gen = app.add_subcommand("gen-data", "Sample reference frames and write a manifest");
  gen->add_option("--config", config_path, "Config file")->required();
  gen->add_option("--out", out_dir, "Output directory");

  CLI::App* pre = app.add_subcommand("precompute", "Precompute HVP targets");
  pre->add_option("--manifest", manifest_path, "Manifest file")->required();

  CLI::App* train = app.add_subcommand("train", "Train the CG potential");
  train->add_option("--manifest", manifest_path, "Manifest file")->required();
  train->add_option("--variant", variant, "FM | FM+AAp | FM+AAp+Cov");
  train->add_option("--seed", seed, "Override the training seed");

  CLI::App* sim = app.add_subcommand("simulate", "Run replica CG trajectories");
  sim->add_option("--manifest", manifest_path, "Manifest file")->required();
  sim->add_option("--seed", seed, "Override the base replica seed");
  sim->add_option("--replicas", replicas, "Replica count (default 20 or config)");

  CLI::App* eval = app.add_subcommand("evaluate", "Compare CG trajectories against reference");
  eval->add_option("--manifest", manifest_path, "Manifest file")->required();

  CLI::App* verify = app.add_subcommand("verify", "Run the oracle check suite");
  verify->add_option("--out", out_dir, "Scratch directory for the end-to-end run");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      hm::cmd_gen_data(config_path, out_dir);
    } else if (pre->parsed()) {
      hm::cmd_precompute(manifest_path);
    } else if (train->parsed()) {
      hm::cmd_train(manifest_path, variant, seed);
    } else if (sim->parsed()) {
      hm::cmd_simulate(manifest_path, seed, replicas);
    } else if (eval->parsed()) {
      hm::cmd_evaluate(manifest_path);
    } else if (verify->parsed()) {
      return hm::cmd_verify(out_dir) == 0 ? 0 : 1;
    }
  } catch (const hm::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const hm::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
