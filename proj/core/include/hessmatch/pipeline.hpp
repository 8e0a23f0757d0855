#ifndef HESSMATCH_PIPELINE_HPP
#define HESSMATCH_PIPELINE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hessmatch/aa_system.hpp"
#include "hessmatch/cg_map.hpp"
#include "hessmatch/cg_model.hpp"
#include "hessmatch/io.hpp"

namespace hm {

// Config -> domain object builders, shared by the commands and tests.
ForceField force_field_from_config(const Config& cfg);
CGMap map_from_config(const Config& cfg, const ForceField& ff);
CGModelState model_from_config(const Config& cfg, int n_beads, int dim);

void cmd_gen_data(const std::string& config_path, const std::string& out_dir);
void cmd_precompute(const std::string& manifest_path);

// variant: FM | FM+AAp | FM+AAp+Cov. seed_override < 0 keeps the config seed.
void cmd_train(const std::string& manifest_path, const std::string& variant,
               long long seed_override = -1);
void cmd_simulate(const std::string& manifest_path, long long seed_override = -1,
                  int replicas_override = 0);
void cmd_evaluate(const std::string& manifest_path);

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

// The oracle suite behind `verify`; scratch_dir receives the end-to-end
// determinism run artifacts.
std::vector<CheckResult> run_verification_checks(const std::string& scratch_dir);

// Prints one line per check plus a summary; returns the failure count.
int cmd_verify(const std::string& scratch_dir);

}  // namespace hm

#endif
