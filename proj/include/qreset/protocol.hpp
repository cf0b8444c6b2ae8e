// protocol — the W4 resetting protocol on a 5-qubit chain.
//
// Device layout: qubits 0..4 in a line, target at slot 2, probes at slots
// 0, 1, 3, 4.  The probes start as two singlet pairs, (0,1) and (3,4).  Each
// round applies the free evolution R to the target and then a fixed
// target–probe interaction U with the next probe in the configured order;
// probes not adjacent to the target are reached by applying U to the
// neighbouring slot and swapping outward.  A projective measurement of the
// probes onto the success subspace post-selects runs in which the target
// has been reset to its pre-evolution state.
//
// Success probability is the Born-rule value Tr(P ρ_f); the overlap formula
// Tr(ρ_f ρ_ps) is computed alongside for comparison (the two agree on pure
// states).

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qreset/circuit.hpp"
#include "qreset/noise.hpp"
#include "qreset/qcore.hpp"

namespace qreset {

inline constexpr int kNumQubits = 5;
inline constexpr int kTargetSlot = 2;
inline constexpr std::array<int, 4> kProbeSlots{0, 1, 3, 4};
inline constexpr double kResetSuccessFloor = 1e-12;

// ── Configuration ────────────────────────────────────────────────────────────

// Target preparation: a pure Bloch state, optionally followed by an idle
// interval that decoheres it into the mixed initial state it will later be
// reset to.  The idle interval carries its own relaxation times so the mixed
// preparation is configurable independently of the circuit noise model.
struct TargetPrep {
  double theta = 0.0;  // polar angle: cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩
  double phi = 0.0;    // azimuth
  bool mixed = false;
  double idle_us = 0.0;
  double idle_t1_us = 30.0;
  double idle_tphi_us = 5.0;

  static TargetPrep pure(double theta, double phi);
  static TargetPrep minus();  // (|0⟩ − |1⟩)/√2
  static TargetPrep one();    // |1⟩
  static TargetPrep mixed_from(double theta, double phi, double idle_us,
                               double t1_us = 30.0, double tphi_us = 5.0);

  // The 2×2 unitary G1 with G1|0⟩ = the pure Bloch state.
  Mat2 g1() const;
  // Ideal prepared target state: the pure state, after the idle channel when
  // mixed preparation is requested.
  DensityMatrix ideal_state() const;
};

enum class RotationAxis { X, Y, Z };

// Free evolution R of the target between interactions: a native rotation
// about a Pauli axis, or an arbitrary 2×2 unitary.
struct FreeEvolution {
  bool is_rotation = true;
  RotationAxis axis = RotationAxis::Z;
  double angle = 0.0;
  Mat2 u = Mat2::Identity();

  static FreeEvolution rotation(RotationAxis axis, double angle);
  static FreeEvolution unitary(const Mat2& u);

  GateOp op(int q) const;
  Mat2 matrix() const;
};

// Target–probe interaction, always expressed target-first (target owns the
// most significant bit of the 4×4 matrix).
struct Interaction {
  enum class Kind { Deterministic, Random, Custom };
  Kind kind = Kind::Deterministic;
  DetUSpec det = DetUSpec::XZ_iYX;
  RandomUnitarySpec random{};
  Mat4 custom = Mat4::Identity();

  static Interaction deterministic(DetUSpec spec);
  static Interaction random_u(const RandomUnitarySpec& spec);
  static Interaction custom_u(const Mat4& u_target_first);

  // Gate sequence realizing U on (probe, target), both adjacent.
  std::vector<GateOp> compile(int probe, int target) const;
  Mat4 matrix() const;
};

enum class ProjectorMode { Auto, Full6, Reduced3 };

struct ProtocolConfig {
  TargetPrep initial_target = TargetPrep::minus();
  FreeEvolution free_evolution = FreeEvolution::rotation(RotationAxis::Z, 0.0);
  Interaction interaction = Interaction::deterministic(DetUSpec::XZ_iYX);
  std::array<int, 4> probe_order{0, 1, 4, 3};
  ProjectorMode projector_mode = ProjectorMode::Auto;  // Auto: reduced3 for
                                                       // deterministic U, full6 otherwise
  std::optional<NoiseModel> noise;
  std::uint64_t seed = 0;
  int n_rounds = 4;

  ProjectorMode resolved_projector_mode() const;
  void validate() const;
};

// ── Success subspace ─────────────────────────────────────────────────────────

struct SuccessSubspace {
  std::vector<Vec> basis;  // orthonormal 16-dim vectors over the probes
  Mat projector;           // 16×16 Hermitian idempotent
  int rank() const { return static_cast<int>(basis.size()); }
};

// The span of {|0000⟩, |1111⟩, (|0011⟩+|1100⟩)/√2} (reduced3) plus the three
// symmetrized weight-1/2/3 vectors (full6), in logical probe order: bit r of
// the 4-bit index is the r-th probe to interact, most significant first.
SuccessSubspace success_projector(ProjectorMode mode);

// Lift the 16×16 probe projector to the 5-qubit device space: identity on the
// target slot, logical probe r mapped to device slot probe_order[r].
Mat lift_to_device(const SuccessSubspace& s, const std::array<int, 4>& probe_order);

// ── Results ──────────────────────────────────────────────────────────────────

struct RunResult {
  DensityMatrix rho_final;       // 5-qubit pre-measurement state
  double p_success = 0.0;        // Born rule Tr(P ρ_f)
  double p_success_literal = 0.0;  // overlap form Tr(ρ_f ρ_ps)
  DensityMatrix rho_reset;       // 1-qubit post-selected target state
  double trace_distance_to_initial = 0.0;
  double fidelity_to_initial = 0.0;
  double initial_trace_distance = 0.0;  // prepared vs ideal target, pre-rounds
  DepthReport depth_report;
};

struct ResetNeverSucceeds : std::runtime_error {
  double p_success;
  explicit ResetNeverSucceeds(double p)
      : std::runtime_error("run_protocol: reset never succeeds"), p_success(p) {}
};

// ── Operations ───────────────────────────────────────────────────────────────

// Target G1 + singlet preparations, scheduled.
Circuit build_prep_circuit(const ProtocolConfig& cfg);
// The interaction rounds ([R; U; routing SWAP] × n_rounds), scheduled.
Circuit build_rounds_circuit(const ProtocolConfig& cfg);
// Preparation and rounds as one scheduled circuit (depth accounting).
Circuit build_protocol_circuit(const ProtocolConfig& cfg);

// Simulate, project onto the success subspace, extract the reset target.
// Noiseless pure-state configs take a statevector fast path; anything with
// noise or a mixed preparation evolves the 32×32 density matrix per layer.
// Throws ResetNeverSucceeds when Tr(P ρ P) < 1e-12.
RunResult run_protocol(const ProtocolConfig& cfg);

// Target trajectory with no probes and no resetting: accumulated applications
// of the free-evolution rotation until total_angle is covered (four no-op
// steps when the rotation angle is zero).  Decoheres per the config's noise
// model when one is set.
std::vector<DensityMatrix> run_no_reset_baseline(const ProtocolConfig& cfg,
                                                 double total_angle);

// Brute-force search for the probe orders under which random interactions
// reset the target (trace distance < 1e-8 whenever p_success ≥ 1e-6 over
// n_trials random (R, U) pairs).
std::vector<std::array<int, 4>> discover_probe_orders(int n_trials = 50,
                                                      std::uint64_t seed = 12345);
// First passing order in lexicographic enumeration — the ProtocolConfig default.
std::array<int, 4> discover_probe_order(int n_trials = 50, std::uint64_t seed = 12345);

}  // namespace qreset
