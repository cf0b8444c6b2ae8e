// tomography — simulated tomographic readout and physical reconstruction.
//
// State tomography measures all 3^n Pauli settings with seeded shot noise
// (or exactly, in the shots=∞ mode), reconstructs by linear inversion over
// the 4^n Pauli expectations, and projects to the nearest physical state by
// eigenvalue truncation with trace redistribution.  Process tomography for a
// single qubit reconstructs the 4×4 χ matrix in the (I, X, Y, Z) basis from
// the four standard preparations |0⟩, |1⟩, |+⟩, |i⟩, and enforces complete
// positivity and trace preservation by Dykstra alternating projections.
// Bootstrap resampling of the whole pipeline yields the 1.96σ error bar on
// the process fidelity.
//
// Setting strings list one letter from {X, Y, Z} per qubit, qubit 0 first
// (most significant bit of the outcome bitstrings).

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qreset/qcore.hpp"

namespace qreset {

// ── Domain types ─────────────────────────────────────────────────────────────

struct MeasurementRecord {
  std::string setting;         // one of {X,Y,Z} per qubit, qubit 0 first
  long long shots = 0;         // 0 in exact mode
  std::vector<double> counts;  // per outcome bitstring; probabilities if exact
  bool exact = false;

  int qubits() const { return static_cast<int>(setting.size()); }
};

struct ChiMatrix {
  Mat m = Mat::Zero(4, 4);  // Pauli basis order (I, X, Y, Z)
  bool cptp_projected = false;
  std::optional<double> error_bar;  // 1.96σ when bootstrapped
};

struct BootstrapReport {
  int n_sets = 0;
  long long shots_per_setting = 0;
  std::vector<double> fidelity_samples;
  double mean_fidelity = 0.0;
  double error_bar = 0.0;  // 1.96 × standard deviation of the samples
};

struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ── State tomography ─────────────────────────────────────────────────────────

// All 3^n setting strings, lexicographic in (X < Y < Z).
std::vector<std::string> all_settings(int n_qubits);

// Measure every setting with `shots` draws from the exact Born distribution.
// Per-setting substreams are derived from `seed`, so results do not depend on
// evaluation order.  shots ≤ 0 selects the exact-expectation mode: counts
// hold the Born probabilities themselves.
std::vector<MeasurementRecord> sample_measurements(const DensityMatrix& rho,
                                                   long long shots, std::uint64_t seed);

// Linear inversion: ρ_raw = (1/2^n) Σ_P ⟨P⟩ P over all 4^n Pauli strings,
// averaging each ⟨P⟩ over the settings that measure it.  Hermitian and
// trace-1 by construction; eigenvalues may be negative.
Mat qst_linear_inversion(const std::vector<MeasurementRecord>& records);

// Nearest (Frobenius) PSD unit-trace matrix: clip negative eigenvalues and
// redistribute the deficit over the remaining ones.
DensityMatrix cp_project(const Mat& rho_raw);

// ── Process tomography ───────────────────────────────────────────────────────

// The four standard preparations |0⟩, |1⟩, |+⟩, |i⟩.
const std::array<DensityMatrix, 4>& standard_qpt_inputs();

// Solve ε(ρ) = Σ_{mn} χ_{mn} P_m ρ P_n for χ from input/output state pairs.
ChiMatrix qpt_chi(const std::array<DensityMatrix, 4>& inputs,
                  const std::array<DensityMatrix, 4>& outputs);

// Dykstra alternating projections between the PSD cone and the
// trace-preservation constraint Σ_{mn} χ_{mn} P_n P_m = I.  Stops when the
// Frobenius step falls below 1e-10 (at most 10,000 iterations); throws
// ConvergenceError with the residuals if the constraints are not met within
// PSD ≥ −1e-9 / TP ≤ 1e-6.
ChiMatrix cptp_project(const ChiMatrix& chi_raw);

// Re χ(I,I): overlap with the identity-only process.
double process_fidelity(const ChiMatrix& chi);

// ── Bootstrap ────────────────────────────────────────────────────────────────

struct BootstrapOptions {
  int n_sets = 200;
  long long shots = 10000;
  std::uint64_t seed = 0;
  bool cp_before_subspace = true;  // CP-project the 5-qubit state before the
                                   // success-subspace projection
};

// Full verification pipeline resampled n_sets times: QST of each 5-qubit
// final state, CP projection, success-subspace projection with the lifted
// projector, partial trace to the target, χ reconstruction, CPTP projection,
// process fidelity.  rho_f_per_input follows standard_qpt_inputs() order.
BootstrapReport bootstrap_qpt(const std::array<DensityMatrix, 4>& rho_f_per_input,
                              const Mat& lifted_projector, int target_slot,
                              const BootstrapOptions& opt);

// ── Record CSV round-trip ────────────────────────────────────────────────────

// Line-oriented "setting,bitstring,count" rows with a header line.
void write_records_csv(std::ostream& out, const std::vector<MeasurementRecord>& records);
std::vector<MeasurementRecord> read_records_csv(std::istream& in);

}  // namespace qreset
