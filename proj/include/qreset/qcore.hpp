// qcore — dense complex linear algebra and quantum-information primitives for
// Hilbert spaces of dimension ≤ 2^16 (the toolkit itself never exceeds 2^5).
//
// Conventions shared by every module:
//   * qubit 0 is the MOST significant bit of a computational-basis index;
//   * tensor products put the LEFT operand on the most significant qubit(s);
//   * all tolerances are centralized below.
//
// All values are immutable after construction; operations allocate fresh
// outputs and are safe to call concurrently on shared inputs.
#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qreset {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;

// ── Numerical tolerances ─────────────────────────────────────────────────────
constexpr double kHermTol = 1e-10;        // max elementwise |ρ − ρ†|
constexpr double kTraceTol = 1e-10;       // |Tr ρ − 1|
constexpr double kPsdTol = -1e-9;         // eigenvalue floor for "physical"
constexpr double kPsdHardTol = -1e-6;     // below this, inputs are rejected
constexpr double kUnitaryTol = 1e-10;     // |U†U − I|
constexpr double kNormTol = 1e-12;        // state-vector L2 norm
constexpr int kMaxQubits = 16;            // dimension cap 2^16

// ── Small helpers ────────────────────────────────────────────────────────────
bool is_power_of_two(int x);
int log2_exact(int x);                    // throws unless x is a power of two
bool is_hermitian(const Mat& m, double tol = kHermTol);
bool is_unitary(const Mat& m, double tol = kUnitaryTol);

// ── Domain types ─────────────────────────────────────────────────────────────

// Normalized pure state on n qubits; dim = 2^n, unit L2 norm.
struct StateVector {
  Vec amps;

  StateVector() = default;
  explicit StateVector(Vec v);            // validates dim, normalizes
  int dim() const { return static_cast<int>(amps.size()); }
  int qubits() const { return log2_exact(dim()); }

  static StateVector basis(int n_qubits, int index);
};

// Hermitian, unit-trace operator; PSD is checked when marked physical.
struct DensityMatrix {
  Mat m;

  DensityMatrix() = default;
  explicit DensityMatrix(Mat rho);        // validates hermiticity + trace
  int dim() const { return static_cast<int>(m.rows()); }
  int qubits() const { return log2_exact(dim()); }

  static DensityMatrix pure(const StateVector& psi);
  static DensityMatrix maximally_mixed(int n_qubits);
};

// Square operator with an optional unitarity hint (validated when set).
struct Operator {
  Mat m;
  bool unitary_flag = false;

  Operator() = default;
  explicit Operator(Mat o, bool unitary = false);
  int dim() const { return static_cast<int>(m.rows()); }
};

// ── Tensor products (left operand owns the most significant qubits) ─────────
Mat kron(const Mat& a, const Mat& b);
Vec kron(const Vec& a, const Vec& b);
Operator tensor(const Operator& a, const Operator& b);
StateVector tensor(const StateVector& a, const StateVector& b);
DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b);

// ── Partial trace ────────────────────────────────────────────────────────────
// Keeps the listed qubits (in the given order, which becomes the output's
// qubit order); traces out the rest. Trace is preserved.
DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<int>& keep);
Mat partial_trace_raw(const Mat& rho, int n_qubits, const std::vector<int>& keep);

// ── Metrics ──────────────────────────────────────────────────────────────────
double trace_distance(const DensityMatrix& a, const DensityMatrix& b);
double trace_distance_raw(const Mat& a, const Mat& b);
double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);
double purity(const DensityMatrix& rho);

// ── Hermitian matrix functions ───────────────────────────────────────────────
Operator matrix_sqrt_psd(const Operator& m);
Mat matrix_sqrt_psd_raw(const Mat& m);

struct EigH {
  Eigen::VectorXd values;                 // ascending
  Mat vectors;                            // columns, orthonormal
};
EigH eig_hermitian(const Operator& m);
EigH eig_hermitian_raw(const Mat& m);

// Hermitize, clip eigenvalues below the tolerance floor to zero, renormalize
// the trace to one. Used to re-certify simulator outputs as physical.
DensityMatrix make_physical(const Mat& rho);

// ── Single-/two-qubit application kernels (any qubit positions) ──────────────
// The 4×4 matrix is indexed with qa's bit as the most significant of the
// gate's 2-bit index; qa and qb may sit anywhere and in any order.
void apply_1q_inplace(Vec& psi, int n_qubits, int q, const Mat2& u);
void apply_2q_inplace(Vec& psi, int n_qubits, int qa, int qb, const Mat4& u);
void conjugate_1q_inplace(Mat& rho, int n_qubits, int q, const Mat2& u);
void conjugate_2q_inplace(Mat& rho, int n_qubits, int qa, int qb, const Mat4& u);

// ── Pauli matrices and common states ─────────────────────────────────────────
const Mat2& pauli_i();
const Mat2& pauli_x();
const Mat2& pauli_y();
const Mat2& pauli_z();
const Mat2& pauli(int k);                 // 0=I, 1=X, 2=Y, 3=Z

// |ψ⟩ = cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩
StateVector bloch_state(double theta, double phi);
std::array<double, 3> bloch_vector(const DensityMatrix& rho1);

// ── Deterministic RNG ────────────────────────────────────────────────────────
// splitmix64 core: identical streams on every platform; never std::hash.
struct Rng {
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);
  double normal();                        // standard normal, Box–Muller

  // UniformRandomBitGenerator interface.
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~static_cast<std::uint64_t>(0); }
  result_type operator()() { return next_u64(); }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stable stream derivation: FNV-1a over the tag, splitmix-mixed with the
// master seed and index. Order-independent parallel execution depends on it.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index);

// Haar-random unitaries (QR of a complex Ginibre matrix, phase-fixed).
Mat haar_unitary(int dim, Rng& rng);
StateVector random_state(int n_qubits, Rng& rng);
DensityMatrix random_density(int n_qubits, Rng& rng);  // mixture of pure states

}  // namespace qreset
