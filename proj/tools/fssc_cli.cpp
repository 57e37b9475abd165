// Command-line driver for training, SNR sweeps, the federated comparison and
// the separate-coding baseline.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fssc/errors.hpp"
#include "fssc/harness.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config applied on top of the preset");
  cmd->add_option("--preset", f.preset, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", f.seed, "base seed");
  cmd->add_option("--out-dir", f.out_dir, "output directory");
}

fssc::ExperimentConfig resolve(const CommonFlags& f) {
  fssc::ExperimentConfig c = fssc::load_experiment_config(f.preset, f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.out_dir.empty()) c.out_dir = f.out_dir;
  c.validate();
  return c;
}

void print_rows(const std::vector<fssc::SweepRow>& rows) {
  for (const auto& r : rows) {
    char snr[32] = "-";
    if (r.snr_db) std::snprintf(snr, sizeof snr, "%.2f", *r.snr_db);
    std::printf("  %-10s %-9s %7s  psnr %7.3f +- %.3f", r.model.c_str(), r.channel.c_str(), snr,
                r.psnr_mean, r.psnr_std);
    if (r.failure_rate && r.snr_db) std::printf("  fail %.3f", *r.failure_rate);
    std::printf("\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated Swin-transformer semantic communication experiments"};
  app.require_subcommand(1);

  CommonFlags train_f, sweep_f, compare_f, baseline_f;
  std::vector<std::string> checkpoints;

  auto* train = app.add_subcommand("train", "train a model and write model.ckpt + train_rounds.csv");
  add_common(train, train_f);
  auto* sweep = app.add_subcommand("sweep-snr", "PSNR versus SNR for checkpoints and the baseline");
  add_common(sweep, sweep_f);
  sweep->add_option("--checkpoint", checkpoints, "checkpoint file (repeatable)");
  auto* compare = app.add_subcommand("compare-fed", "FedAvg global model versus local-only models");
  add_common(compare, compare_f);
  auto* base = app.add_subcommand("baseline", "separate DCT + LDPC + QPSK pipeline sweep");
  add_common(base, baseline_f);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const auto c = resolve(train_f);
      const auto out = fssc::cmd_train(c);
      const auto& last = out.run.rounds.back();
      std::printf("trained %zu rounds%s, final global loss %.6g\n", out.run.rounds.size(),
                  out.run.stopped_early ? " (early stop)" : "", last.global_loss);
      std::printf("wrote %s\nwrote %s\n", out.checkpoint.c_str(), out.rounds_csv.c_str());
    } else if (*sweep) {
      const auto c = resolve(sweep_f);
      const auto out = fssc::cmd_sweep_snr(c, checkpoints);
      print_rows(out.rows);
      std::printf("wrote %s\n", out.csv.c_str());
    } else if (*compare) {
      const auto c = resolve(compare_f);
      const auto out = fssc::cmd_compare_fed(c);
      for (std::size_t m = 0; m < out.models.size(); ++m) {
        std::printf("  %-10s test loss %.6g\n", out.models[m].c_str(), out.test_losses[m]);
      }
      print_rows(out.rows);
      std::printf("wrote %s\nwrote %s\nwrote %s\n", out.psnr_csv.c_str(),
                  out.convergence_csv.c_str(), out.test_loss_csv.c_str());
    } else if (*base) {
      const auto c = resolve(baseline_f);
      const auto out = fssc::cmd_baseline(c);
      print_rows(out.rows);
      if (out.cliff.snr_lo) std::printf("snr_lo %.2f dB\n", *out.cliff.snr_lo);
      if (out.cliff.snr_hi) std::printf("snr_hi %.2f dB\n", *out.cliff.snr_hi);
      std::printf("wrote %s\n", out.csv.c_str());
    }
  } catch (const fssc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const fssc::FileError& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return 3;
  } catch (const fssc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
