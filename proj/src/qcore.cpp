#include "qreset/qcore.hpp"

#include <algorithm>
#include <cmath>

namespace qreset {

// ── Small helpers ────────────────────────────────────────────────────────────

bool is_power_of_two(int x) { return x > 0 && (x & (x - 1)) == 0; }

int log2_exact(int x) {
  if (!is_power_of_two(x))
    throw std::invalid_argument("log2_exact: dimension " + std::to_string(x) +
                                " is not a power of two");
  int n = 0;
  while ((1 << n) < x) ++n;
  return n;
}

bool is_hermitian(const Mat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

bool is_unitary(const Mat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  Mat d = m.adjoint() * m - Mat::Identity(m.rows(), m.cols());
  return d.cwiseAbs().maxCoeff() <= tol;
}

// ── Domain types ─────────────────────────────────────────────────────────────

StateVector::StateVector(Vec v) {
  const int d = static_cast<int>(v.size());
  if (d < 2 || !is_power_of_two(d))
    throw std::invalid_argument("StateVector: dimension must be a power of two >= 2");
  const double n = v.norm();
  if (n < 1e-14)
    throw std::invalid_argument("StateVector: cannot normalize a zero vector");
  amps = v / n;
}

StateVector StateVector::basis(int n_qubits, int index) {
  const int d = 1 << n_qubits;
  if (index < 0 || index >= d)
    throw std::invalid_argument("StateVector::basis: index out of range");
  Vec v = Vec::Zero(d);
  v[index] = 1.0;
  return StateVector(std::move(v));
}

DensityMatrix::DensityMatrix(Mat rho) {
  const int d = static_cast<int>(rho.rows());
  if (d < 2 || rho.cols() != d || !is_power_of_two(d))
    throw std::invalid_argument("DensityMatrix: square power-of-two dimension required");
  if (!is_hermitian(rho, kHermTol))
    throw std::invalid_argument("DensityMatrix: not Hermitian within tolerance");
  if (std::abs(rho.trace().real() - 1.0) > kTraceTol || std::abs(rho.trace().imag()) > kTraceTol)
    throw std::invalid_argument("DensityMatrix: trace differs from one");
  m = std::move(rho);
}

DensityMatrix DensityMatrix::pure(const StateVector& psi) {
  DensityMatrix rho;
  rho.m = psi.amps * psi.amps.adjoint();
  return rho;
}

DensityMatrix DensityMatrix::maximally_mixed(int n_qubits) {
  const int d = 1 << n_qubits;
  DensityMatrix rho;
  rho.m = Mat::Identity(d, d) / static_cast<double>(d);
  return rho;
}

Operator::Operator(Mat o, bool unitary) {
  if (o.rows() != o.cols() || o.rows() < 1)
    throw std::invalid_argument("Operator: square matrix required");
  if (unitary && !is_unitary(o, kUnitaryTol))
    throw std::invalid_argument("Operator: unitary_flag set but U†U != I within tolerance");
  m = std::move(o);
  unitary_flag = unitary;
}

// ── Tensor products ──────────────────────────────────────────────────────────

namespace {
void check_tensor_dim(long long da, long long db) {
  if (da * db > (1LL << kMaxQubits))
    throw std::invalid_argument("tensor: dimension overflow beyond 2^16");
}
}  // namespace

Mat kron(const Mat& a, const Mat& b) {
  check_tensor_dim(a.rows(), b.rows());
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vec kron(const Vec& a, const Vec& b) {
  check_tensor_dim(a.size(), b.size());
  Vec out(a.size() * b.size());
  for (int i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
  return out;
}

Operator tensor(const Operator& a, const Operator& b) {
  return Operator(kron(a.m, b.m), a.unitary_flag && b.unitary_flag);
}

StateVector tensor(const StateVector& a, const StateVector& b) {
  return StateVector(kron(a.amps, b.amps));
}

DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  DensityMatrix out;
  out.m = kron(a.m, b.m);
  return out;
}

// ── Partial trace ────────────────────────────────────────────────────────────

Mat partial_trace_raw(const Mat& rho, int n_qubits, const std::vector<int>& keep) {
  if (keep.empty()) throw std::invalid_argument("partial_trace: empty keep list");
  for (int q : keep)
    if (q < 0 || q >= n_qubits)
      throw std::invalid_argument("partial_trace: qubit index out of range");
  for (size_t i = 0; i < keep.size(); ++i)
    for (size_t j = i + 1; j < keep.size(); ++j)
      if (keep[i] == keep[j]) throw std::invalid_argument("partial_trace: duplicate kept qubit");

  const int nk = static_cast<int>(keep.size());
  std::vector<int> traced;
  for (int q = 0; q < n_qubits; ++q)
    if (std::find(keep.begin(), keep.end(), q) == keep.end()) traced.push_back(q);
  const int nt = static_cast<int>(traced.size());

  // Device bit q sits at shift n_qubits-1-q (qubit 0 = MSB).
  auto shift = [n_qubits](int q) { return n_qubits - 1 - q; };

  const int dk = 1 << nk, dt = 1 << nt;
  Mat out = Mat::Zero(dk, dk);
  for (int a = 0; a < dk; ++a) {
    for (int b = 0; b < dk; ++b) {
      cplx s = 0.0;
      for (int t = 0; t < dt; ++t) {
        int ia = 0, ib = 0;
        for (int k = 0; k < nk; ++k) {
          // Output qubit k (MSB-first in keep order) carries bit of a / b.
          const int bit_a = (a >> (nk - 1 - k)) & 1;
          const int bit_b = (b >> (nk - 1 - k)) & 1;
          ia |= bit_a << shift(keep[k]);
          ib |= bit_b << shift(keep[k]);
        }
        for (int k = 0; k < nt; ++k) {
          const int bit = (t >> (nt - 1 - k)) & 1;
          ia |= bit << shift(traced[k]);
          ib |= bit << shift(traced[k]);
        }
        s += rho(ia, ib);
      }
      out(a, b) = s;
    }
  }
  return out;
}

DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<int>& keep) {
  DensityMatrix out;
  out.m = partial_trace_raw(rho.m, rho.qubits(), keep);
  return out;
}

// ── Metrics ──────────────────────────────────────────────────────────────────

double trace_distance_raw(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("trace_distance: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Mat> es(a - b, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  return trace_distance_raw(a.m, b.m);
}

double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim())
    throw std::invalid_argument("fidelity: dimension mismatch");
  const Mat sr = matrix_sqrt_psd_raw(rho.m);
  const Mat inner = matrix_sqrt_psd_raw(sr * sigma.m * sr);
  const double t = inner.trace().real();
  return t * t;
}

double purity(const DensityMatrix& rho) { return (rho.m * rho.m).trace().real(); }

// ── Hermitian matrix functions ───────────────────────────────────────────────

Mat matrix_sqrt_psd_raw(const Mat& m) {
  if (!is_hermitian(m, 1e-8))
    throw std::invalid_argument("matrix_sqrt_psd: input not Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < kPsdHardTol)
      throw std::invalid_argument("matrix_sqrt_psd: eigenvalue below -1e-6");
    if (ev[i] < 0) ev[i] = 0;
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
}

Operator matrix_sqrt_psd(const Operator& m) { return Operator(matrix_sqrt_psd_raw(m.m)); }

EigH eig_hermitian_raw(const Mat& m) {
  if (!is_hermitian(m, 1e-8))
    throw std::invalid_argument("eig_hermitian: input not Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  return EigH{es.eigenvalues(), es.eigenvectors()};
}

EigH eig_hermitian(const Operator& m) { return eig_hermitian_raw(m.m); }

DensityMatrix make_physical(const Mat& rho) {
  Mat h = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i)
    if (ev[i] < 0) ev[i] = 0;
  const double s = ev.sum();
  if (s < 1e-14) throw std::invalid_argument("make_physical: zero spectrum");
  ev /= s;
  DensityMatrix out;
  out.m = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  return out;
}

// ── Application kernels ──────────────────────────────────────────────────────

void apply_1q_inplace(Vec& psi, int n_qubits, int q, const Mat2& u) {
  if (q < 0 || q >= n_qubits)
    throw std::invalid_argument("apply_1q: qubit index out of range");
  const int d = static_cast<int>(psi.size());
  const int sh = n_qubits - 1 - q;
  const int mask = 1 << sh;
  for (int i = 0; i < d; ++i) {
    if (i & mask) continue;  // visit each pair once, at its bit=0 member
    const int j = i | mask;
    const cplx a0 = psi[i], a1 = psi[j];
    psi[i] = u(0, 0) * a0 + u(0, 1) * a1;
    psi[j] = u(1, 0) * a0 + u(1, 1) * a1;
  }
}

void apply_2q_inplace(Vec& psi, int n_qubits, int qa, int qb, const Mat4& u) {
  if (qa == qb || qa < 0 || qb < 0 || qa >= n_qubits || qb >= n_qubits)
    throw std::invalid_argument("apply_2q: bad qubit indices");
  const int d = static_cast<int>(psi.size());
  const int ma = 1 << (n_qubits - 1 - qa);
  const int mb = 1 << (n_qubits - 1 - qb);
  for (int i = 0; i < d; ++i) {
    if (i & (ma | mb)) continue;  // base index with both gate bits clear
    const int i00 = i, i01 = i | mb, i10 = i | ma, i11 = i | ma | mb;
    const cplx a00 = psi[i00], a01 = psi[i01], a10 = psi[i10], a11 = psi[i11];
    psi[i00] = u(0, 0) * a00 + u(0, 1) * a01 + u(0, 2) * a10 + u(0, 3) * a11;
    psi[i01] = u(1, 0) * a00 + u(1, 1) * a01 + u(1, 2) * a10 + u(1, 3) * a11;
    psi[i10] = u(2, 0) * a00 + u(2, 1) * a01 + u(2, 2) * a10 + u(2, 3) * a11;
    psi[i11] = u(3, 0) * a00 + u(3, 1) * a01 + u(3, 2) * a10 + u(3, 3) * a11;
  }
}

namespace {
// ρ → UρU† for a k-local U, by applying U to every column, then U† from the
// right via the conjugated kernel on rows (equivalently U* on columns of ρ†;
// here: apply to columns of ρ, then to columns of ρ.adjoint(), re-adjoint).
template <typename ApplyCols>
void conjugate_via(Mat& rho, ApplyCols&& apply_cols) {
  apply_cols(rho);
  rho = rho.adjoint().eval();
  apply_cols(rho);
  rho = rho.adjoint().eval();
}
}  // namespace

void conjugate_1q_inplace(Mat& rho, int n_qubits, int q, const Mat2& u) {
  const int d = static_cast<int>(rho.rows());
  const int sh = n_qubits - 1 - q;
  const int mask = 1 << sh;
  conjugate_via(rho, [&](Mat& r) {
    for (int c = 0; c < d; ++c) {
      for (int i = 0; i < d; ++i) {
        if (i & mask) continue;
        const int j = i | mask;
        const cplx a0 = r(i, c), a1 = r(j, c);
        r(i, c) = u(0, 0) * a0 + u(0, 1) * a1;
        r(j, c) = u(1, 0) * a0 + u(1, 1) * a1;
      }
    }
  });
}

void conjugate_2q_inplace(Mat& rho, int n_qubits, int qa, int qb, const Mat4& u) {
  const int d = static_cast<int>(rho.rows());
  const int ma = 1 << (n_qubits - 1 - qa);
  const int mb = 1 << (n_qubits - 1 - qb);
  conjugate_via(rho, [&](Mat& r) {
    for (int c = 0; c < d; ++c) {
      for (int i = 0; i < d; ++i) {
        if (i & (ma | mb)) continue;
        const int i00 = i, i01 = i | mb, i10 = i | ma, i11 = i | ma | mb;
        const cplx a00 = r(i00, c), a01 = r(i01, c), a10 = r(i10, c), a11 = r(i11, c);
        r(i00, c) = u(0, 0) * a00 + u(0, 1) * a01 + u(0, 2) * a10 + u(0, 3) * a11;
        r(i01, c) = u(1, 0) * a00 + u(1, 1) * a01 + u(1, 2) * a10 + u(1, 3) * a11;
        r(i10, c) = u(2, 0) * a00 + u(2, 1) * a01 + u(2, 2) * a10 + u(2, 3) * a11;
        r(i11, c) = u(3, 0) * a00 + u(3, 1) * a01 + u(3, 2) * a10 + u(3, 3) * a11;
      }
    }
  });
}

// ── Pauli matrices and common states ─────────────────────────────────────────

const Mat2& pauli_i() {
  static const Mat2 m = Mat2::Identity();
  return m;
}
const Mat2& pauli_x() {
  static const Mat2 m = (Mat2() << 0, 1, 1, 0).finished();
  return m;
}
const Mat2& pauli_y() {
  static const Mat2 m = (Mat2() << 0, cplx(0, -1), cplx(0, 1), 0).finished();
  return m;
}
const Mat2& pauli_z() {
  static const Mat2 m = (Mat2() << 1, 0, 0, -1).finished();
  return m;
}
const Mat2& pauli(int k) {
  switch (k) {
    case 0: return pauli_i();
    case 1: return pauli_x();
    case 2: return pauli_y();
    case 3: return pauli_z();
    default: throw std::invalid_argument("pauli: index must be 0..3");
  }
}

StateVector bloch_state(double theta, double phi) {
  Vec v(2);
  v[0] = std::cos(theta / 2);
  v[1] = std::exp(cplx(0, phi)) * std::sin(theta / 2);
  return StateVector(std::move(v));
}

std::array<double, 3> bloch_vector(const DensityMatrix& rho1) {
  if (rho1.dim() != 2) throw std::invalid_argument("bloch_vector: 1-qubit state required");
  return {(rho1.m * pauli_x()).trace().real(),
          (rho1.m * pauli_y()).trace().real(),
          (rho1.m * pauli_z()).trace().real()};
}

// ── Deterministic RNG ────────────────────────────────────────────────────────

std::uint64_t Rng::next_u64() {
  // splitmix64 (Steele, Lea, Flood 2014); full-period 64-bit mixer.
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform(), u2 = uniform();
  while (u1 <= 1e-300) u1 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * M_PI * u2;
  spare_ = r * std::sin(th);
  have_spare_ = true;
  return r * std::cos(th);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index) {
  // FNV-1a 64-bit over the tag bytes.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  // splitmix-mix the three components so nearby (master, index) decorrelate.
  Rng mix(master ^ h);
  std::uint64_t s = mix.next_u64() ^ (index * 0x9E3779B97F4A7C15ULL);
  return Rng(s).next_u64();
}

Mat haar_unitary(int dim, Rng& rng) {
  Mat z(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) z(i, j) = cplx(rng.normal(), rng.normal()) / std::sqrt(2.0);
  Eigen::HouseholderQR<Mat> qr(z);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j) {
    cplx d = r(j, j);
    q.col(j) *= (std::abs(d) > 0 ? d / std::abs(d) : cplx(1, 0));
  }
  return q;
}

StateVector random_state(int n_qubits, Rng& rng) {
  const int d = 1 << n_qubits;
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = cplx(rng.normal(), rng.normal());
  return StateVector(std::move(v));
}

DensityMatrix random_density(int n_qubits, Rng& rng) {
  const int d = 1 << n_qubits;
  // Mixture of d Haar-ish pure states with Dirichlet-ish weights.
  Mat rho = Mat::Zero(d, d);
  double wsum = 0;
  for (int k = 0; k < d; ++k) {
    const StateVector psi = random_state(n_qubits, rng);
    const double w = -std::log(1.0 - rng.uniform() + 1e-300);
    rho += w * (psi.amps * psi.amps.adjoint());
    wsum += w;
  }
  rho /= wsum;
  DensityMatrix out;
  out.m = 0.5 * (rho + rho.adjoint());
  return out;
}

}  // namespace qreset
