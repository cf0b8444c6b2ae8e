// w4sim — command-line front end for the W4 reset-protocol toolkit.
//
// Subcommands: run (config file), sweep, random, qpt, bootstrap, calibrate,
// emit-plots.  Exit codes: 0 success, 2 configuration error, 3 numerical
// non-convergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qreset/harness.hpp"
#include "qreset/protocol.hpp"
#include "qreset/tomography.hpp"

namespace {

using namespace qreset;

struct CommonOpts {
  std::string outdir;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--outdir", opts.outdir, "Output directory (default: $W4SIM_OUTDIR or ./results)");
  cmd->add_option("--seed", opts.seed, "Master seed for derived per-run seeds");
  cmd->add_option("--workers", opts.workers, "Worker threads (0 = hardware concurrency)");
}

void apply_common(ExperimentConfig& cfg, const CommonOpts& opts) {
  if (!opts.outdir.empty()) cfg.outdir = opts.outdir;
  if (opts.seed) cfg.master_seed = *opts.seed;
  if (opts.workers) cfg.workers = *opts.workers;
}

NoiseModel uniform_noise(double t1_us, double tphi_us) {
  NoiseModel nm;
  nm.default_t1_us = t1_us;
  nm.default_tphi_us = tphi_us;
  return nm;
}

void report_rows(const std::vector<ResultRow>& rows, const ExperimentConfig& cfg) {
  double mean_p = 0.0, mean_d = 0.0;
  int n_success = 0;
  for (const ResultRow& r : rows) {
    mean_p += r.p_success;
    if (r.trace_distance >= 0.0) {
      mean_d += r.trace_distance;
      ++n_success;
    }
  }
  if (!rows.empty()) mean_p /= static_cast<double>(rows.size());
  if (n_success > 0) mean_d /= n_success;
  std::printf("%zu rows -> %s\n", rows.size(),
              (std::filesystem::path(cfg.resolved_outdir()) / "results.csv").c_str());
  std::printf("mean p_success = %.6f   mean trace distance (successes) = %.6f\n", mean_p,
              mean_d);
}

// Four protocol runs feeding process tomography, shared by qpt and bootstrap.
std::array<DensityMatrix, 4> qpt_finals(const ExperimentConfig& cfg) {
  std::array<DensityMatrix, 4> finals;
  for (int i = 0; i < 4; ++i)
    finals[static_cast<size_t>(i)] = run_protocol(protocol_for_index(cfg, i, nullptr)).rho_final;
  return finals;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"W4 quantum reset protocol simulator"};
  app.require_subcommand(1);

  // run ----------------------------------------------------------------------
  std::string run_config;
  std::string run_case_name;
  CommonOpts run_opts;
  CLI::App* cmd_run = app.add_subcommand("run", "Run a case from a JSON config or preset");
  cmd_run->add_option("config", run_config, "JSON config file");
  cmd_run->add_option("--case", run_case_name,
                      "Preset case id (case1a, case1b, case1c, case2_qpt, case3_random)");
  add_common(cmd_run, run_opts);

  // sweep --------------------------------------------------------------------
  std::string sweep_case = "case1a";
  std::vector<double> sweep_grid;
  double sweep_t1 = 0.0, sweep_tphi = 0.0;
  CommonOpts sweep_opts;
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "Free-evolution angle sweep");
  cmd_sweep->add_option("--case", sweep_case, "Sweep preset: case1a or case1b")
      ->check(CLI::IsMember({"case1a", "case1b"}));
  cmd_sweep->add_option("--phi", sweep_grid, "Angles in units of pi (overrides preset grid)");
  cmd_sweep->add_option("--t1", sweep_t1, "Uniform T1 in microseconds (enables decoherence)");
  cmd_sweep->add_option("--tphi", sweep_tphi, "Uniform Tphi in microseconds");
  add_common(cmd_sweep, sweep_opts);

  // random -------------------------------------------------------------------
  int random_n = 100;
  double random_t1 = 0.0, random_tphi = 0.0;
  std::string random_target = "one";
  CommonOpts random_opts;
  CLI::App* cmd_random = app.add_subcommand("random", "Campaign over random interactions");
  cmd_random->add_option("-n,--n", random_n, "Number of random interactions");
  cmd_random->add_option("--target", random_target, "Initial target: one or minus")
      ->check(CLI::IsMember({"one", "minus"}));
  cmd_random->add_option("--t1", random_t1, "Uniform T1 in microseconds (enables decoherence)");
  cmd_random->add_option("--tphi", random_tphi, "Uniform Tphi in microseconds");
  add_common(cmd_random, random_opts);

  // qpt ----------------------------------------------------------------------
  long long qpt_shots = 10000;
  int qpt_sets = 200;
  double qpt_t1 = 0.0, qpt_tphi = 0.0;
  CommonOpts qpt_opts;
  CLI::App* cmd_qpt = app.add_subcommand("qpt", "Process tomography of the reset channel");
  cmd_qpt->add_option("--shots", qpt_shots, "Shots per tomography setting (<=0: exact)");
  cmd_qpt->add_option("--n-bootstrap", qpt_sets, "Bootstrap replica count");
  cmd_qpt->add_option("--t1", qpt_t1, "Uniform T1 in microseconds (enables decoherence)");
  cmd_qpt->add_option("--tphi", qpt_tphi, "Uniform Tphi in microseconds");
  add_common(cmd_qpt, qpt_opts);

  // bootstrap ----------------------------------------------------------------
  std::vector<long long> boot_shots{1000, 10000, 100000};
  int boot_sets = 200;
  double boot_t1 = 0.0, boot_tphi = 0.0;
  CommonOpts boot_opts;
  CLI::App* cmd_boot =
      app.add_subcommand("bootstrap", "Bootstrap error-bar scaling across shot counts");
  cmd_boot->add_option("--shots", boot_shots, "Shot counts to profile");
  cmd_boot->add_option("--n-sets", boot_sets, "Bootstrap replica count per shot count");
  cmd_boot->add_option("--t1", boot_t1, "Uniform T1 in microseconds (enables decoherence)");
  cmd_boot->add_option("--tphi", boot_tphi, "Uniform Tphi in microseconds");
  add_common(cmd_boot, boot_opts);

  // calibrate ----------------------------------------------------------------
  std::string cal_target = "fidelity";
  double cal_value = -1.0;
  double cal_t1 = 30.0;
  CommonOpts cal_opts;
  CLI::App* cmd_cal = app.add_subcommand("calibrate", "Bisect Tphi to hit a noise target");
  cmd_cal->add_option("--target", cal_target, "fidelity (5-qubit state) or mixed-d (1 us idle)")
      ->check(CLI::IsMember({"fidelity", "mixed-d"}));
  cmd_cal->add_option("--value", cal_value, "Target value (default 0.386 / 0.098)");
  cmd_cal->add_option("--t1", cal_t1, "Uniform T1 in microseconds held fixed");
  add_common(cmd_cal, cal_opts);

  // emit-plots ---------------------------------------------------------------
  std::string plots_config;
  std::string plots_case = "case1a";
  std::string plots_kind = "all";
  CommonOpts plots_opts;
  CLI::App* cmd_plots = app.add_subcommand("emit-plots", "Write plotdata/*.csv for a case");
  cmd_plots->add_option("config", plots_config, "JSON config file (else --case preset)");
  cmd_plots->add_option("--case", plots_case, "Preset case id");
  cmd_plots->add_option("--kind", plots_kind, "bloch, bar, cumulative, city, or all")
      ->check(CLI::IsMember({"bloch", "bar", "cumulative", "city", "all"}));
  add_common(cmd_plots, plots_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse error
    return code == 0 ? 0 : 2;
  }

  if (cmd_run->parsed()) {
    if (run_config.empty() && run_case_name.empty())
      throw ConfigError("run: provide a config file or --case");
    ExperimentConfig cfg = run_config.empty() ? preset_case(case_from_name(run_case_name))
                                              : load_config(run_config);
    apply_common(cfg, run_opts);
    report_rows(run_case(cfg), cfg);
  } else if (cmd_sweep->parsed()) {
    ExperimentConfig cfg = preset_case(case_from_name(sweep_case));
    if (!sweep_grid.empty()) cfg.sweep_phi_over_pi = sweep_grid;
    if (sweep_t1 > 0.0 || sweep_tphi > 0.0)
      cfg.protocol.noise = uniform_noise(sweep_t1 > 0.0 ? sweep_t1 : 30.0,
                                         sweep_tphi > 0.0 ? sweep_tphi : 5.0);
    apply_common(cfg, sweep_opts);
    report_rows(run_case(cfg), cfg);
  } else if (cmd_random->parsed()) {
    ExperimentConfig cfg = preset_case(CaseId::Case3Random);
    cfg.n_random = random_n;
    if (random_target == "minus") cfg.protocol.initial_target = TargetPrep::minus();
    if (random_t1 > 0.0 || random_tphi > 0.0)
      cfg.protocol.noise = uniform_noise(random_t1 > 0.0 ? random_t1 : 30.0,
                                         random_tphi > 0.0 ? random_tphi : 5.0);
    apply_common(cfg, random_opts);
    report_rows(run_case(cfg), cfg);
  } else if (cmd_qpt->parsed()) {
    ExperimentConfig cfg = preset_case(CaseId::Case2Qpt);
    cfg.tomography = TomographyOptions{qpt_shots, qpt_sets};
    if (qpt_t1 > 0.0 || qpt_tphi > 0.0)
      cfg.protocol.noise =
          uniform_noise(qpt_t1 > 0.0 ? qpt_t1 : 30.0, qpt_tphi > 0.0 ? qpt_tphi : 5.0);
    apply_common(cfg, qpt_opts);
    report_rows(run_case(cfg), cfg);
    std::ifstream sj(std::filesystem::path(cfg.resolved_outdir()) / "summary.json");
    std::cout << sj.rdbuf();
  } else if (cmd_boot->parsed()) {
    ExperimentConfig cfg = preset_case(CaseId::Case2Qpt);
    if (boot_t1 > 0.0 || boot_tphi > 0.0)
      cfg.protocol.noise =
          uniform_noise(boot_t1 > 0.0 ? boot_t1 : 30.0, boot_tphi > 0.0 ? boot_tphi : 5.0);
    apply_common(cfg, boot_opts);
    const std::array<DensityMatrix, 4> finals = qpt_finals(cfg);
    const ProtocolConfig pc0 = protocol_for_index(cfg, 0, nullptr);
    const Mat lifted =
        lift_to_device(success_projector(pc0.resolved_projector_mode()), pc0.probe_order);
    const std::filesystem::path outdir(cfg.resolved_outdir());
    std::filesystem::create_directories(outdir);
    std::ofstream out(outdir / "bootstrap.csv", std::ios::trunc);
    out << "shots,mean_process_fidelity,error_bar\n";
    for (long long shots : boot_shots) {
      BootstrapOptions opt;
      opt.n_sets = boot_sets;
      opt.shots = shots;
      opt.seed = cfg.master_seed;
      const BootstrapReport report = bootstrap_qpt(finals, lifted, kTargetSlot, opt);
      char line[128];
      std::snprintf(line, sizeof(line), "%lld,%.12g,%.12g\n", shots, report.mean_fidelity,
                    report.error_bar);
      out << line;
      std::printf("shots=%-8lld  F=%.4f  error bar=%.5f\n", shots, report.mean_fidelity,
                  report.error_bar);
    }
  } else if (cmd_cal->parsed()) {
    CalibrationTarget target;
    if (cal_target == "fidelity") {
      target.kind = CalibrationTarget::Kind::FiveQubitFidelity;
      target.value = cal_value > 0.0 ? cal_value : 0.386;
    } else {
      target.kind = CalibrationTarget::Kind::InitialMixedD;
      target.value = cal_value > 0.0 ? cal_value : 0.098;
    }
    NoiseModel base;
    base.default_t1_us = cal_t1;
    const CalibrationResult result = calibrate_noise(target, base);
    std::printf("calibrated Tphi = %.6f us (achieved %.6f, target %.6f, T1 = %.3f us)\n",
                result.tphi_us, result.achieved, target.value, cal_t1);
    if (!cal_opts.outdir.empty()) {
      std::filesystem::create_directories(cal_opts.outdir);
      std::ofstream out(std::filesystem::path(cal_opts.outdir) / "calibration.json",
                        std::ios::trunc);
      out << "{\n  \"target\": \"" << cal_target << "\",\n  \"target_value\": " << target.value
          << ",\n  \"t1_us\": " << cal_t1 << ",\n  \"tphi_us\": " << result.tphi_us
          << ",\n  \"achieved\": " << result.achieved << "\n}\n";
    }
  } else if (cmd_plots->parsed()) {
    ExperimentConfig cfg = plots_config.empty() ? preset_case(case_from_name(plots_case))
                                                : load_config(plots_config);
    apply_common(cfg, plots_opts);
    const std::filesystem::path results_path =
        std::filesystem::path(cfg.resolved_outdir()) / "results.csv";
    const std::vector<ResultRow> rows = std::filesystem::exists(results_path)
                                            ? read_results_csv(results_path.string())
                                            : run_case(cfg);
    auto want = [&plots_kind](const char* k) { return plots_kind == "all" || plots_kind == k; };
    if (want("bloch")) emit_plot_data(cfg, rows, PlotKind::BlochTrajectory);
    if (want("bar")) emit_plot_data(cfg, rows, PlotKind::BarPerUnitary);
    if (want("cumulative")) emit_plot_data(cfg, rows, PlotKind::CumulativeAverage);
    if (want("city")) emit_plot_data(cfg, rows, PlotKind::DensityMatrixCity);
    std::printf("plot data -> %s\n",
                (std::filesystem::path(cfg.resolved_outdir()) / "plotdata").c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const qreset::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const qreset::ConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
