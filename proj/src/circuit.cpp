#include "qreset/circuit.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace qreset {

namespace {

constexpr double kDropAngleTol = 1e-12;

double wrap_angle(double a) {
  // into (−π, π]
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

Mat2 rx(double t) {
  Mat2 m;
  m << std::cos(t / 2), cplx(0, -std::sin(t / 2)), cplx(0, -std::sin(t / 2)), std::cos(t / 2);
  return m;
}
Mat2 ry(double t) {
  Mat2 m;
  m << std::cos(t / 2), -std::sin(t / 2), std::sin(t / 2), std::cos(t / 2);
  return m;
}
Mat2 rz(double t) {
  Mat2 m;
  m << std::exp(cplx(0, -t / 2)), 0, 0, std::exp(cplx(0, t / 2));
  return m;
}
Mat2 hadamard() {
  Mat2 m;
  m << 1, 1, 1, -1;
  return m / std::sqrt(2.0);
}
Mat2 sgate() {
  Mat2 m;
  m << 1, 0, 0, cplx(0, 1);
  return m;
}

}  // namespace

const char* gate_name(GateKind k) {
  switch (k) {
    case GateKind::RX: return "RX";
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::X: return "X";
    case GateKind::Y: return "Y";
    case GateKind::Z: return "Z";
    case GateKind::H: return "H";
    case GateKind::Phase: return "PHASE";
    case GateKind::CZ: return "CZ";
    case GateKind::Custom1q: return "CUSTOM1Q";
    case GateKind::Custom2q: return "CUSTOM2Q";
  }
  return "?";
}

GateOp make_1q(GateKind k, int q, double angle) {
  if (k == GateKind::CZ || k == GateKind::Custom2q || k == GateKind::Custom1q)
    throw std::invalid_argument("make_1q: wrong constructor for this kind");
  GateOp g;
  g.kind = k;
  g.q = {q, -1};
  g.angle = angle;
  return g;
}

GateOp make_custom_1q(int q, const Mat2& u) {
  if (!is_unitary(u, kUnitaryTol))
    throw std::invalid_argument("make_custom_1q: matrix not unitary");
  GateOp g;
  g.kind = GateKind::Custom1q;
  g.q = {q, -1};
  g.custom = u;
  return g;
}

GateOp make_cz(int qa, int qb) {
  if (qa == qb || std::abs(qa - qb) != 1)
    throw std::invalid_argument("make_cz: qubits must be distinct and adjacent");
  GateOp g;
  g.kind = GateKind::CZ;
  g.q = {std::min(qa, qb), std::max(qa, qb)};
  return g;
}

GateOp make_custom_2q(int q_msb, int q_lsb, const Mat4& u) {
  if (q_msb == q_lsb || std::abs(q_msb - q_lsb) != 1)
    throw std::invalid_argument("make_custom_2q: qubits must be distinct and adjacent");
  if (!is_unitary(u, kUnitaryTol))
    throw std::invalid_argument("make_custom_2q: matrix not unitary");
  GateOp g;
  g.kind = GateKind::Custom2q;
  g.q = {q_msb, q_lsb};
  g.custom = u;
  return g;
}

Mat gate_matrix(const GateOp& g) {
  switch (g.kind) {
    case GateKind::RX: return rx(g.angle);
    case GateKind::RY: return ry(g.angle);
    case GateKind::RZ: return rz(g.angle);
    case GateKind::X: return pauli_x();
    case GateKind::Y: return pauli_y();
    case GateKind::Z: return pauli_z();
    case GateKind::H: return hadamard();
    case GateKind::Phase: {
      Mat2 m;
      m << 1, 0, 0, std::exp(cplx(0, g.angle));
      return m;
    }
    case GateKind::CZ: {
      Mat4 m = Mat4::Identity();
      m(3, 3) = -1;
      return m;
    }
    case GateKind::Custom1q:
    case GateKind::Custom2q: return g.custom;
  }
  throw std::invalid_argument("gate_matrix: unknown kind");
}

// ── Scheduling ───────────────────────────────────────────────────────────────

void schedule(Circuit& c) {
  c.layers.clear();
  std::vector<int> frontier(c.n_qubits, 0);
  std::vector<std::uint32_t> used;  // per-layer qubit mask (Single layers)

  for (int k = 0; k < static_cast<int>(c.ops.size()); ++k) {
    const GateOp& op = c.ops[k];
    for (int j = 0; j < op.n_qubits(); ++j)
      if (op.q[j] < 0 || op.q[j] >= c.n_qubits)
        throw std::invalid_argument("schedule: qubit index out of range");

    if (op.n_qubits() == 1) {
      const int q = op.q[0];
      const std::uint32_t bit = 1u << q;
      int placed = -1;
      for (int i = frontier[q]; i < static_cast<int>(c.layers.size()); ++i) {
        if (c.layers[i].dclass == DurationClass::Single && !(used[i] & bit)) {
          placed = i;
          break;
        }
      }
      if (placed < 0) {
        c.layers.push_back(Layer{DurationClass::Single, {}});
        used.push_back(0);
        placed = static_cast<int>(c.layers.size()) - 1;
      }
      c.layers[placed].op_indices.push_back(k);
      used[placed] |= bit;
      frontier[q] = placed + 1;
    } else {
      // Every two-qubit gate gets an exclusive layer: all spectators idle.
      c.layers.push_back(Layer{DurationClass::Double, {k}});
      used.push_back((1u << op.q[0]) | (1u << op.q[1]));
      const int placed = static_cast<int>(c.layers.size()) - 1;
      frontier[op.q[0]] = frontier[op.q[1]] = placed + 1;
    }
  }
  c.scheduled = true;
}

DepthReport Circuit::depth() const {
  DepthReport r;
  for (const Layer& l : layers)
    (l.dclass == DurationClass::Single ? r.depth_single : r.depth_double) += 1;
  for (const GateOp& op : ops)
    (op.n_qubits() == 1 ? r.count_single : r.count_double) += 1;
  return r;
}

std::string Circuit::to_text() const {
  std::ostringstream out;
  char buf[64];
  for (const GateOp& op : ops) {
    out << gate_name(op.kind) << ' ' << op.q[0];
    if (op.n_qubits() == 2) out << ',' << op.q[1];
    const bool has_angle = op.kind == GateKind::RX || op.kind == GateKind::RY ||
                           op.kind == GateKind::RZ || op.kind == GateKind::Phase;
    if (has_angle) {
      std::snprintf(buf, sizeof(buf), " %.12g", op.angle);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

// ── Simulation ───────────────────────────────────────────────────────────────

StateVector apply_noiseless(const Circuit& c, const StateVector& psi) {
  if (psi.qubits() != c.n_qubits)
    throw std::invalid_argument("apply_noiseless: qubit count mismatch");
  Vec v = psi.amps;
  for (const GateOp& op : c.ops) {
    const Mat u = gate_matrix(op);
    if (op.n_qubits() == 1)
      apply_1q_inplace(v, c.n_qubits, op.q[0], Mat2(u));
    else
      apply_2q_inplace(v, c.n_qubits, op.q[0], op.q[1], Mat4(u));
  }
  return StateVector(std::move(v));
}

// ── Euler decomposition ──────────────────────────────────────────────────────

EulerZYZ euler_zyz(const Mat2& u) {
  if (!is_unitary(u, 1e-9)) throw std::invalid_argument("euler_zyz: input not unitary");
  const cplx det = u(0, 0) * u(1, 1) - u(0, 1) * u(1, 0);
  const double phase = 0.5 * std::arg(det);
  const Mat2 v = std::exp(cplx(0, -phase)) * u;  // in SU(2)

  EulerZYZ e{};
  e.phase = phase;
  const double m00 = std::abs(v(0, 0)), m10 = std::abs(v(1, 0));
  e.b = 2.0 * std::atan2(m10, m00);
  if (m10 < 1e-12) {
    e.c = 0.0;
    e.a = 2.0 * std::arg(v(1, 1));
  } else if (m00 < 1e-12) {
    e.c = 0.0;
    e.a = 2.0 * std::arg(v(1, 0));
  } else {
    const double sum = 2.0 * std::arg(v(1, 1));   // a + c
    const double dif = 2.0 * std::arg(v(1, 0));   // a − c
    e.a = 0.5 * (sum + dif);
    e.c = 0.5 * (sum - dif);
  }
  // Wrapping a half-angle rotation by 2π negates its matrix; fold the sign
  // into the global phase so the identity u = e^{iδ} RZ(a) RY(b) RZ(c) holds
  // for the wrapped angles too.
  int sign_flips = 0;
  for (double* ang : {&e.a, &e.c}) {
    const double wrapped = wrap_angle(*ang);
    sign_flips += static_cast<int>(std::lround(std::abs(*ang - wrapped) / (2.0 * M_PI)));
    *ang = wrapped;
  }
  if (sign_flips % 2 == 1) e.phase += M_PI;
  return e;
}

void emit_1q_unitary(std::vector<GateOp>& ops, int q, const Mat2& u) {
  const EulerZYZ e = euler_zyz(u);
  if (std::abs(e.c) > kDropAngleTol) ops.push_back(make_1q(GateKind::RZ, q, e.c));
  if (std::abs(e.b) > kDropAngleTol) ops.push_back(make_1q(GateKind::RY, q, e.b));
  if (std::abs(e.a) > kDropAngleTol) ops.push_back(make_1q(GateKind::RZ, q, e.a));
}

// ── Composite-gate compilation ───────────────────────────────────────────────

std::vector<GateOp> compile_swap(int q_a, int q_b) {
  if (std::abs(q_a - q_b) != 1)
    throw std::invalid_argument("compile_swap: non-adjacent pair");
  const double h = M_PI / 2;
  std::vector<GateOp> ops;
  ops.push_back(make_1q(GateKind::RY, q_b, h));
  ops.push_back(make_cz(q_a, q_b));
  ops.push_back(make_1q(GateKind::RY, q_a, h));
  ops.push_back(make_1q(GateKind::RY, q_b, -h));
  ops.push_back(make_cz(q_a, q_b));
  ops.push_back(make_1q(GateKind::RY, q_a, -h));
  ops.push_back(make_1q(GateKind::RY, q_b, h));
  ops.push_back(make_cz(q_a, q_b));
  ops.push_back(make_1q(GateKind::RY, q_b, -h));
  return ops;
}

std::vector<GateOp> compile_singlet_prep(int q_a, int q_b) {
  if (std::abs(q_a - q_b) != 1)
    throw std::invalid_argument("compile_singlet_prep: non-adjacent pair");
  const double h = M_PI / 2;
  std::vector<GateOp> ops;
  ops.push_back(make_1q(GateKind::RY, q_a, h));
  ops.push_back(make_1q(GateKind::RY, q_b, h));
  ops.push_back(make_cz(q_a, q_b));
  ops.push_back(make_1q(GateKind::RY, q_b, h));
  ops.push_back(make_1q(GateKind::Z, q_a));
  return ops;
}

Mat4 deterministic_U_matrix(DetUSpec spec) {
  const cplx i1(0, 1);
  const Mat xz = kron(Mat(pauli_x()), Mat(pauli_z()));
  const Mat yx = kron(Mat(pauli_y()), Mat(pauli_x()));
  const Mat zz = kron(Mat(pauli_z()), Mat(pauli_z()));
  Mat4 u;
  if (spec == DetUSpec::XZ_iYX)
    u = (xz + i1 * yx) / std::sqrt(2.0);
  else
    u = (-zz + i1 * yx) / std::sqrt(2.0);
  return u;
}

std::vector<GateOp> compile_deterministic_U(DetUSpec spec, int probe, int target) {
  if (std::abs(probe - target) != 1)
    throw std::invalid_argument("compile_deterministic_U: non-adjacent pair");
  // KAK-style factoring around one CZ (verified against the target matrices):
  //   U = (post_t ⊗ post_p) · CZ · (pre_t ⊗ pre_p),  first factor on target,
  // with W = RX(−π/2):
  //   XZ_iYX : post_t = X·S,      post_p = Z·H·Z·W, pre_t = I, pre_p = W†
  //   mZZ_iYX: post_t = −Z·H·S,   post_p = Z·H·Z·W, pre_t = H, pre_p = W†
  const Mat2 w = rx(-M_PI / 2);
  const Mat2 wdag = rx(M_PI / 2);
  const Mat2 post_p = Mat2(pauli_z() * hadamard() * pauli_z() * w);
  Mat2 pre_t, post_t;
  if (spec == DetUSpec::XZ_iYX) {
    pre_t = Mat2::Identity();
    post_t = Mat2(pauli_x() * sgate());
  } else {
    pre_t = hadamard();
    post_t = Mat2(-pauli_z() * hadamard() * sgate());
  }

  std::vector<GateOp> ops;
  if ((pre_t - Mat2::Identity()).cwiseAbs().maxCoeff() > 1e-14)
    emit_1q_unitary(ops, target, pre_t);
  emit_1q_unitary(ops, probe, wdag);
  ops.push_back(make_cz(probe, target));
  emit_1q_unitary(ops, target, post_t);
  emit_1q_unitary(ops, probe, post_p);
  return ops;
}

RandomUnitarySpec RandomUnitarySpec::from_seed(std::uint64_t seed) {
  RandomUnitarySpec s;
  s.seed = seed;
  Rng rng(seed);
  for (double& a : s.angles) a = rng.uniform(0.0, 2.0 * M_PI);
  return s;
}

std::vector<GateOp> compile_random_U(const RandomUnitarySpec& spec, int probe, int target) {
  if (std::abs(probe - target) != 1)
    throw std::invalid_argument("compile_random_U: non-adjacent pair");
  const auto& a = spec.angles;
  std::vector<GateOp> ops;
  auto triple = [&ops](int q, double az1, double ay, double az2) {
    // time order RZ(α), RY(β), RZ(γ)
    ops.push_back(make_1q(GateKind::RZ, q, az1));
    ops.push_back(make_1q(GateKind::RY, q, ay));
    ops.push_back(make_1q(GateKind::RZ, q, az2));
  };
  triple(probe, a[0], a[1], a[2]);
  triple(target, a[3], a[4], a[5]);
  ops.push_back(make_cz(probe, target));
  triple(probe, a[6], a[7], a[8]);
  triple(target, a[9], a[10], a[11]);
  return ops;
}

Mat4 random_U_matrix(const RandomUnitarySpec& spec) {
  const auto& a = spec.angles;
  auto rot = [](double az1, double ay, double az2) -> Mat2 {
    return Mat2(rz(az2) * ry(ay) * rz(az1));  // time order α, β, γ
  };
  const Mat2 p_pre = rot(a[0], a[1], a[2]);
  const Mat2 t_pre = rot(a[3], a[4], a[5]);
  const Mat2 p_post = rot(a[6], a[7], a[8]);
  const Mat2 t_post = rot(a[9], a[10], a[11]);
  Mat4 cz = Mat4::Identity();
  cz(3, 3) = -1;
  return Mat4(kron(Mat(t_post), Mat(p_post)) * cz * kron(Mat(t_pre), Mat(p_pre)));
}

std::vector<GateOp> compile_custom_U(const Mat4& u_target_first, int probe, int target) {
  // Listing the target first makes the custom matrix's MSB the target bit,
  // matching the target-first convention without reindexing.
  return {make_custom_2q(target, probe, u_target_first)};
}

// ── Adjacent-RZ merging ──────────────────────────────────────────────────────

std::vector<GateOp> merge_adjacent_rz(const std::vector<GateOp>& ops) {
  std::vector<GateOp> out;
  // last_rz[q]: index in `out` of a trailing RZ on q not yet interrupted.
  std::vector<int> last_rz(64, -1);
  auto touch = [&last_rz](int q) { last_rz[q] = -1; };

  for (const GateOp& op : ops) {
    if (op.kind == GateKind::RZ) {
      const int q = op.q[0];
      if (last_rz[q] >= 0) {
        GateOp& prev = out[static_cast<size_t>(last_rz[q])];
        prev.angle = wrap_angle(prev.angle + op.angle);
        if (std::abs(prev.angle) < kDropAngleTol) {
          out.erase(out.begin() + last_rz[q]);
          for (int& idx : last_rz)
            if (idx > last_rz[q]) --idx;
          last_rz[q] = -1;
        }
        continue;
      }
      out.push_back(op);
      last_rz[q] = static_cast<int>(out.size()) - 1;
      continue;
    }
    for (int j = 0; j < op.n_qubits(); ++j) touch(op.q[j]);
    out.push_back(op);
  }
  return out;
}

}  // namespace qreset
