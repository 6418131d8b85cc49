// Command-line front end: dataset generation, training sweeps, evaluation,
// probing, and figure-data export. Exit codes: 0 success, 1 usage error,
// 2 data/integrity error, 3 numeric failure.

#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "seqrecall/experiment.hpp"

namespace {

using namespace seqrecall;

struct CommonFlags {
  std::string config_path;
  std::string out_override;
  uint64_t seed_override = 0;
  bool has_seed = false;
  bool has_out = false;
};

ExperimentConfig load_with_overrides(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags.config_path);
  if (flags.has_seed) cfg.seed = flags.seed_override;
  if (flags.has_out) cfg.out = flags.out_override;
  return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "experiment config JSON")->required();
  cmd->add_option("--seed", flags.seed_override, "override the config's global seed")
      ->each([&flags](const std::string&) { flags.has_seed = true; });
  cmd->add_option("--out", flags.out_override, "override the config's output directory")
      ->each([&flags](const std::string&) { flags.has_out = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"middle-token recall laboratory"};
  app.require_subcommand(1);

  CommonFlags gen_flags, train_flags, probe_flags, report_flags;
  std::string cell_arg, ckpt_path, data_path, dest_dir;
  int jobs = 1;
  bool resume = false;
  int probe_limit = 0;
  int fig1_hidden = 0;

  CLI::App* gen = app.add_subcommand("gen-data", "generate datasets and manifests");
  add_common(gen, gen_flags);

  CLI::App* train = app.add_subcommand("train", "train one cell or the whole grid");
  add_common(train, train_flags);
  train->add_option("--cell", cell_arg, "single cell as regimen:n:d (default: whole grid)");
  train->add_option("--jobs", jobs, "worker threads for independent runs")->check(CLI::Range(1, 64));
  train->add_flag("--resume", resume, "continue from partial checkpoints if present");

  CLI::App* eval = app.add_subcommand("eval", "accuracy of a checkpoint on a dataset");
  eval->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  eval->add_option("--data", data_path, "dataset JSONL file")->required();

  CLI::App* probe = app.add_subcommand("probe", "timestep-regression probe of a checkpoint");
  add_common(probe, probe_flags);
  probe->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  probe->add_option("--data", data_path, "test dataset JSONL file")->required();
  probe->add_option("--dest", dest_dir, "output directory (default out/probe/<cell>)");
  probe->add_option("--limit", probe_limit, "test examples to collect states from");

  CLI::App* report = app.add_subcommand("report", "figure-data CSVs from completed cells");
  add_common(report, report_flags);
  report->add_option("--hidden", fig1_hidden,
                     "hidden size for the per-regimen figure (default: smallest present)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) {
      const ExperimentConfig cfg = load_with_overrides(gen_flags);
      cmd_gen_data(cfg);
      std::printf("datasets written to %s\n", OutPaths(cfg.out).data_dir().string().c_str());
    } else if (train->parsed()) {
      const ExperimentConfig cfg = load_with_overrides(train_flags);
      std::printf("%s\n", kSweepHeader);
      if (!cell_arg.empty()) {
        const CellOutcome outcome = cmd_train_cell(cfg, parse_cell(cell_arg), jobs, resume);
        std::printf("%s\n", sweep_row_csv(outcome.row).c_str());
      } else {
        for (const auto& outcome : cmd_train_all(cfg, jobs, resume))
          std::printf("%s\n", sweep_row_csv(outcome.row).c_str());
      }
    } else if (eval->parsed()) {
      std::printf("%.6f\n", cmd_eval(ckpt_path, data_path));
    } else if (probe->parsed()) {
      const ExperimentConfig cfg = load_with_overrides(probe_flags);
      if (dest_dir.empty()) {
        const std::string cell = fs::path(ckpt_path).parent_path().filename().string();
        dest_dir = (OutPaths(cfg.out).probe_dir() / cell).string();
      }
      const int limit = probe_limit > 0 ? probe_limit : cfg.probe_examples;
      const ProbeOutcome outcome = cmd_probe(ckpt_path, data_path, dest_dir, limit);
      std::printf("report: %s\n", outcome.report_path.string().c_str());
      std::printf("full_state_r2: c=%.6f h=%.6f\n", outcome.report.full_state_r2_c,
                  outcome.report.full_state_r2_h);
      if (!outcome.report.per_neuron.empty()) {
        const auto& top = outcome.report.per_neuron.front();
        std::printf("top neuron: %d (r2_c=%.6f, r2_h=%.6f)\n", top.neuron, top.r2_c, top.r2_h);
      }
    } else if (report->parsed()) {
      const ExperimentConfig cfg = load_with_overrides(report_flags);
      for (const auto& p : cmd_report(cfg, fig1_hidden))
        std::printf("%s\n", p.string().c_str());
    }
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const IntegrityError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
