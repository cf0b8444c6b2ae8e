// circuit — gate-level IR, standard gate matrices, ASAP layer scheduling with
// split single/double depth accounting, and compilation of the composite
// gates the device needs: SWAP (3 CZ), singlet preparation (1 CZ), the two
// deterministic target-probe interactions (1 CZ each), and the 12-angle
// random interaction family (1 CZ).
//
// Interaction matrices follow the target-first convention: the FIRST tensor
// factor of a 4×4 interaction acts on the target qubit.  Compiled gate lists
// realize that convention on a (probe, target) device pair.
//
// Two-qubit gates act on adjacent device qubits only and are scheduled into
// exclusive layers (all other qubits idle), which is what makes the split
// depth counts of the 5-qubit protocol circuits well-defined.
#pragma once

#include "qreset/qcore.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qreset {

// ── Gate IR ──────────────────────────────────────────────────────────────────

enum class GateKind { RX, RY, RZ, X, Y, Z, H, Phase, CZ, Custom1q, Custom2q };
enum class DurationClass { Single, Double };

const char* gate_name(GateKind k);

struct GateOp {
  GateKind kind;
  std::array<int, 2> q{-1, -1};  // first-listed qubit owns the matrix MSB
  double angle = 0.0;            // rotation / phase gates only
  Mat custom;                    // Custom1q (2×2) / Custom2q (4×4) payload

  int n_qubits() const { return q[1] < 0 ? 1 : 2; }
  DurationClass duration_class() const {
    return n_qubits() == 2 ? DurationClass::Double : DurationClass::Single;
  }
};

GateOp make_1q(GateKind k, int q, double angle = 0.0);
GateOp make_custom_1q(int q, const Mat2& u);
GateOp make_cz(int qa, int qb);
GateOp make_custom_2q(int q_msb, int q_lsb, const Mat4& u);

// 2×2 or 4×4 unitary for a gate; half-angle rotation convention
// RZ(θ) = diag(e^{−iθ/2}, e^{+iθ/2}), CZ = diag(1,1,1,−1).
Mat gate_matrix(const GateOp& g);

struct Layer {
  DurationClass dclass;
  std::vector<int> op_indices;   // into Circuit::ops, per-qubit order preserved
};

struct DepthReport {
  int depth_single = 0;
  int depth_double = 0;
  int count_single = 0;
  int count_double = 0;
};

struct Circuit {
  int n_qubits = 0;
  std::vector<GateOp> ops;
  std::vector<Layer> layers;     // filled by schedule()
  bool scheduled = false;

  DepthReport depth() const;
  std::string to_text() const;   // one gate per line: "GATE q[,q] [angle]"
};

// ── Scheduling ───────────────────────────────────────────────────────────────
// ASAP per-qubit frontiers; layers are homogeneous in duration class and every
// two-qubit gate gets a layer of its own (spectators idle during a CZ).
void schedule(Circuit& c);

// ── Simulation (noiseless statevector path) ──────────────────────────────────
StateVector apply_noiseless(const Circuit& c, const StateVector& psi);

// ── Euler decomposition of 2×2 unitaries ─────────────────────────────────────
// u = e^{iδ} RZ(a) RY(b) RZ(c); reconstruction is exact to rounding.
struct EulerZYZ {
  double a, b, c, phase;
};
EulerZYZ euler_zyz(const Mat2& u);

// Append u on qubit q as RZ(c), RY(b), RZ(a) in time order, dropping
// rotations with |angle| < 1e-12 (global phase discarded).
void emit_1q_unitary(std::vector<GateOp>& ops, int q, const Mat2& u);

// ── Composite-gate compilation ───────────────────────────────────────────────

// 3 CZ + 6 RY(±π/2); equals SWAP up to global phase.
std::vector<GateOp> compile_swap(int q_a, int q_b);

// 1 CZ + singles; |00⟩ → (|01⟩−|10⟩)/√2 up to global phase.
std::vector<GateOp> compile_singlet_prep(int q_a, int q_b);

// The two deterministic interactions, 1 CZ each:
//   XZ_iYX  : (X⊗Z + iY⊗X)/√2      (first factor on the target)
//   mZZ_iYX : (−Z⊗Z + iY⊗X)/√2
enum class DetUSpec { XZ_iYX, mZZ_iYX };
std::vector<GateOp> compile_deterministic_U(DetUSpec spec, int probe, int target);
Mat4 deterministic_U_matrix(DetUSpec spec);  // target-first 4×4

// 12-angle random interaction: per qubit RZ(α)RY(β)RZ(γ) before and after one
// CZ; angles drawn uniformly from [0, 2π) when built from a seed.
struct RandomUnitarySpec {
  std::array<double, 12> angles{};  // [0:3) probe pre, [3:6) target pre,
                                    // [6:9) probe post, [9:12) target post
  std::uint64_t seed = 0;

  static RandomUnitarySpec from_seed(std::uint64_t seed);
};
std::vector<GateOp> compile_random_U(const RandomUnitarySpec& spec, int probe, int target);
Mat4 random_U_matrix(const RandomUnitarySpec& spec);  // target-first 4×4

// Arbitrary 4×4 interaction (target-first) as a single custom two-qubit op.
std::vector<GateOp> compile_custom_U(const Mat4& u_target_first, int probe, int target);

// ── Optional cleanup pass ────────────────────────────────────────────────────
// Merges runs of RZ on the same qubit that no other op interrupts; drops
// merged rotations with negligible angle.
std::vector<GateOp> merge_adjacent_rz(const std::vector<GateOp>& ops);

}  // namespace qreset
