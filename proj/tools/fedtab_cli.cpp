// Copyright 2026 The fedtab Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// fedtab command line: run / compare / sweep experiments, or write a
// synthetic Framingham-shaped CSV.
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid config or usage.
// Failures print {"error": {"kind": ..., "message": ...}} on stderr.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fedtab/experiment.hpp"

namespace {

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::string output;
  bool quiet = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--seed", f.seed, "Run a single seed instead of the configured list");
  app->add_option("--output", f.output, "Report path (overrides output_path)");
  app->add_flag("--quiet", f.quiet, "Do not print the report to stdout");
}

void apply_common(fedtab::ExperimentConfig& c, const CommonFlags& f) {
  if (f.seed) c.seeds = {*f.seed};
  if (!f.output.empty()) c.output_path = f.output;
}

void emit(const fedtab::Json& payload, const std::string& path, const CommonFlags& f) {
  if (!path.empty()) fedtab::write_text(path, payload.dump(2) + "\n");
  if (!f.quiet) std::cout << payload.dump(2) << "\n";
}

void emit_report(const fedtab::ExperimentReport& r, const std::string& path, const CommonFlags& f) {
  if (!path.empty()) fedtab::write_report(r, path);
  if (!f.quiet) std::cout << fedtab::report_to_json(r).dump(2) << "\n";
}

int report_error(const std::string& kind, const std::string& message, int code) {
  const fedtab::Json j{{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << j.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning experiments on tabular clinical data"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string config_path, config_b_path;

  auto* run_cmd = app.add_subcommand("run", "Run one experiment config over its seeds");
  run_cmd->add_option("config", config_path, "Config file (JSON)")->required();
  add_common(run_cmd, flags);

  auto* compare_cmd = app.add_subcommand("compare", "Pair two configs per seed and t-test their F1");
  compare_cmd->add_option("config_a", config_path, "First config")->required();
  compare_cmd->add_option("config_b", config_b_path, "Second config")->required();
  add_common(compare_cmd, flags);

  auto* sweep_cmd = app.add_subcommand("sweep", "Run a models x samplings x modes grid");
  sweep_cmd->add_option("config", config_path, "Sweep config (JSON with a grid section)")->required();
  add_common(sweep_cmd, flags);

  fedtab::SyntheticConfig synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic Framingham-shaped CSV");
  synth_cmd->add_option("output", synth_out, "CSV path")->required();
  synth_cmd->add_option("--rows", synth.rows, "Row count");
  synth_cmd->add_option("--positive-rate", synth.positive_rate, "Expected positive rate");
  synth_cmd->add_option("--signal", synth.signal, "Risk-score strength");
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 2);
  }

  try {
    if (*run_cmd) {
      auto c = fedtab::load_config_file(config_path);
      apply_common(c, flags);
      c.validate();
      emit_report(fedtab::run(c), c.output_path, flags);
    } else if (*compare_cmd) {
      auto a = fedtab::load_config_file(config_path);
      auto b = fedtab::load_config_file(config_b_path);
      apply_common(a, flags);
      apply_common(b, flags);
      emit(fedtab::compare(a, b), flags.output.empty() ? a.output_path : flags.output, flags);
    } else if (*sweep_cmd) {
      auto s = fedtab::load_sweep_file(config_path);
      apply_common(s.base, flags);
      emit_report(fedtab::sweep(s), s.base.output_path, flags);
    } else if (*synth_cmd) {
      fedtab::save_csv(synth_out, fedtab::make_synthetic_framingham(synth));
      if (!flags.quiet) std::cerr << "wrote " << synth_out << "\n";
    }
  } catch (const fedtab::Error& e) {
    return report_error(std::string(fedtab::to_string(e.kind())), e.what(),
                        e.kind() == fedtab::ErrorKind::kConfig ? 2 : 1);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 0;
}
