// noise — Kraus-channel decoherence model layered onto scheduled circuits.
//
// Each qubit decoheres through amplitude damping (time scale T1) and pure
// dephasing (time scale Tphi).  A scheduled circuit advances wall-clock time
// in layers; after the unitaries of a layer are applied, every qubit touched
// by the layer — and, when idle decoherence is enabled, every spectator
// qubit as well — is passed through the combined single-qubit channel for
// that layer's duration.  Decay weights default to the plain duration/T
// ratio clamped to [0, 1]; an exponential 1 − exp(−duration/T) variant is
// available behind a switch.

#pragma once

#include <vector>

#include "qreset/circuit.hpp"
#include "qreset/qcore.hpp"

namespace qreset {

// ── Channel representation ───────────────────────────────────────────────────

struct KrausChannel {
  std::vector<Mat> ops;  // Σ K†K = I within kKrausTol
  int dim() const { return ops.empty() ? 0 : static_cast<int>(ops.front().rows()); }
};

inline constexpr double kKrausTol = 1e-12;

// Verify the completeness relation Σ K†K = I.
bool is_trace_preserving(const KrausChannel& ch, double tol = kKrausTol);

// Single-qubit amplitude damping with decay weight gamma ∈ [0, 1].
KrausChannel amplitude_damping(double gamma);

// Single-qubit pure dephasing with weight gamma_phi ∈ [0, 1].
KrausChannel dephasing(double gamma_phi);

// Amplitude damping and dephasing composed into one four-operator channel.
KrausChannel combined_channel(double gamma, double gamma_phi);

// Σ K_q ρ K_q† with the single-qubit channel acting on qubit q.
// Rejects channels that violate the completeness relation.
DensityMatrix apply_channel(const KrausChannel& ch, const DensityMatrix& rho, int qubit);

// ── Noise model ──────────────────────────────────────────────────────────────

struct NoiseModel {
  // Per-qubit relaxation/dephasing times in microseconds.  Empty vectors mean
  // "uniform" with the scalar defaults below applied to every qubit.
  std::vector<double> t1_us;
  std::vector<double> tphi_us;
  double default_t1_us = 30.0;
  double default_tphi_us = 5.0;

  // Layer durations by duration class, in nanoseconds.
  double single_ns = 30.0;
  double double_ns = 45.0;

  // Apply the combined channel to spectator qubits during each layer.
  bool idle_decoherence = true;

  // false: gamma = clamp(duration/T, 0, 1).  true: gamma = 1 − exp(−duration/T).
  bool exponential_weights = false;

  double t1_of(int q) const;
  double tphi_of(int q) const;
  double layer_duration_ns(DurationClass c) const;
  double weight(double duration_ns, double t_us) const;

  // Channel for one qubit idling (or being driven) for duration_ns.
  KrausChannel channel_for(int q, double duration_ns) const;
};

// Combined channel for `duration_us` microseconds of free decay of `qubit`.
KrausChannel idle_channel(double duration_us, const NoiseModel& model, int qubit);

// Apply one scheduled layer: unitaries first, then per-qubit decoherence for
// the layer's duration (spectators included when idle_decoherence is set).
DensityMatrix apply_noisy_layer(const Circuit& c, const Layer& layer,
                                DensityMatrix rho, const NoiseModel& model);

// Run a scheduled circuit on a density matrix under the noise model.
// Schedules a copy on demand if the circuit has no layers yet.
DensityMatrix apply_noisy(const Circuit& c, const DensityMatrix& rho_in,
                          const NoiseModel& model);

}  // namespace qreset
