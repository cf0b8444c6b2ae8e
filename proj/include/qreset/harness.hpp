// harness — experiment driver for the W4 resetting campaigns.
//
// Declarative configs (JSON or presets) describe a sweep over the free-
// evolution angle, a random-interaction campaign, or a single run (the QPT
// case runs the four standard preparations and bootstraps the process
// fidelity).  Results land in <outdir>/results.csv (one row per run,
// 12-significant-digit floats), <outdir>/summary.json (config echo plus
// aggregates), and <outdir>/plotdata/*.csv.  Campaign runs are an
// embarrassingly parallel map with per-index seeds derived from the master
// seed, so output bytes are identical for any worker count; interrupted
// campaigns resume from the rows already present in results.csv.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qreset/protocol.hpp"
#include "qreset/tomography.hpp"

namespace qreset {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ── Experiment configuration ─────────────────────────────────────────────────

enum class CaseId { Case1a, Case1b, Case1c, Case2Qpt, Case3Random, Custom };

const char* case_name(CaseId id);
CaseId case_from_name(const std::string& name);

struct TomographyOptions {
  long long shots = 10000;
  int n_bootstrap = 200;
};

struct ExperimentConfig {
  CaseId case_id = CaseId::Custom;
  ProtocolConfig protocol;
  std::vector<double> sweep_phi_over_pi;  // free-evolution angle grid, in units of π
  int n_random = 0;                       // random-interaction campaign size
  bool single_run = false;                // run `protocol` exactly as configured
  std::optional<TomographyOptions> tomography;
  std::string outdir;  // empty → $W4SIM_OUTDIR → "results"
  std::uint64_t master_seed = 7700;
  int workers = 0;  // 0 → hardware concurrency

  void validate() const;  // throws ConfigError with field-level messages
  std::string resolved_outdir() const;
};

inline constexpr const char* kOutdirEnvVar = "W4SIM_OUTDIR";

// Presets for the published experiment cases (angles, preparations,
// interactions, projector modes).
ExperimentConfig preset_case(CaseId id);

// JSON round-trip; the echoed config reproduces the run byte-for-byte.
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

// ── Results ──────────────────────────────────────────────────────────────────

struct ResultRow {
  std::string case_id;
  int index = 0;
  double phi_over_pi = 0.0;
  double p_success = 0.0;
  double trace_distance = 0.0;
  double fidelity = 0.0;
  int depth_single = 0;
  int depth_double = 0;
  std::uint64_t seed = 0;
};

extern const char* const kResultsCsvHeader;
std::string format_row(const ResultRow& row);  // %.12g floats
void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::string& path);

// ── Execution ────────────────────────────────────────────────────────────────

// The protocol config and derived seed for one run of the experiment.
ProtocolConfig protocol_for_index(const ExperimentConfig& cfg, int index,
                                  std::uint64_t* seed_out = nullptr);
// One completed run (pure function of config and index).
ResultRow campaign_row(const ExperimentConfig& cfg, int index);

// All rows of a random campaign, computed in parallel, ordered by index.
std::vector<ResultRow> random_campaign(const ExperimentConfig& cfg);

// Execute the configured runs, write results.csv / summary.json / plotdata,
// resuming from any rows already on disk.  Returns all rows in index order.
std::vector<ResultRow> run_case(const ExperimentConfig& cfg);

// ── Noise calibration ────────────────────────────────────────────────────────

struct CalibrationTarget {
  enum class Kind { FiveQubitFidelity, InitialMixedD };
  Kind kind = Kind::FiveQubitFidelity;
  double value = 0.386;
};

struct CalibrationResult {
  NoiseModel model;
  double tphi_us = 0.0;
  double achieved = 0.0;
};

// 1-D bisection on the uniform Tφ (T1 and durations held at the base model's
// values) until the simulated observable matches the target within 0.01.
// FiveQubitFidelity: overlap of the decohered 5-qubit pre-measurement state
// with the noiseless one (deterministic case, |−⟩, R_z(3π/8)).
// InitialMixedD: trace distance of |−⟩ to itself after a 1 µs idle.
CalibrationResult calibrate_noise(const CalibrationTarget& target,
                                  const NoiseModel& base = NoiseModel{});

// ── Plot data ────────────────────────────────────────────────────────────────

enum class PlotKind { BlochTrajectory, BarPerUnitary, CumulativeAverage, DensityMatrixCity };

// Write <outdir>/plotdata/<kind>.csv from the rows (re-running cheap pieces
// of the config where states rather than rows are needed).
void emit_plot_data(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows,
                    PlotKind kind);

}  // namespace qreset
