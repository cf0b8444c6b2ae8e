#include "qreset/protocol.hpp"

#include <algorithm>
#include <cmath>

namespace qreset {

namespace {

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

// Conjugate every op of the circuit through the density matrix, no noise.
void apply_exact(const Circuit& c, DensityMatrix& rho) {
  for (const GateOp& op : c.ops) {
    const Mat u = gate_matrix(op);
    if (op.n_qubits() == 1)
      conjugate_1q_inplace(rho.m, c.n_qubits, op.q[0], Mat2(u));
    else
      conjugate_2q_inplace(rho.m, c.n_qubits, op.q[0], op.q[1], Mat4(u));
  }
}

int device_bit(int index, int slot) { return (index >> (kNumQubits - 1 - slot)) & 1; }

}  // namespace

// ── TargetPrep ───────────────────────────────────────────────────────────────

TargetPrep TargetPrep::pure(double theta, double phi) {
  TargetPrep p;
  p.theta = theta;
  p.phi = phi;
  return p;
}

TargetPrep TargetPrep::minus() { return pure(M_PI / 2, M_PI); }
TargetPrep TargetPrep::one() { return pure(M_PI, 0.0); }

TargetPrep TargetPrep::mixed_from(double theta, double phi, double idle_us,
                                  double t1_us, double tphi_us) {
  TargetPrep p = pure(theta, phi);
  p.mixed = true;
  p.idle_us = idle_us;
  p.idle_t1_us = t1_us;
  p.idle_tphi_us = tphi_us;
  return p;
}

Mat2 TargetPrep::g1() const {
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  Mat2 u;
  u << c, -std::exp(cplx(0, -phi)) * s, std::exp(cplx(0, phi)) * s, c;
  return u;
}

DensityMatrix TargetPrep::ideal_state() const {
  DensityMatrix rho = DensityMatrix::pure(bloch_state(theta, phi));
  if (mixed) {
    const KrausChannel ch = combined_channel(clamp01(idle_us / idle_t1_us),
                                             clamp01(idle_us / idle_tphi_us));
    rho = apply_channel(ch, rho, 0);
  }
  return rho;
}

// ── FreeEvolution ────────────────────────────────────────────────────────────

FreeEvolution FreeEvolution::rotation(RotationAxis axis, double angle) {
  FreeEvolution f;
  f.axis = axis;
  f.angle = angle;
  return f;
}

FreeEvolution FreeEvolution::unitary(const Mat2& u) {
  if (!is_unitary(u, kUnitaryTol))
    throw std::invalid_argument("FreeEvolution: matrix not unitary");
  FreeEvolution f;
  f.is_rotation = false;
  f.u = u;
  return f;
}

GateOp FreeEvolution::op(int q) const {
  if (!is_rotation) return make_custom_1q(q, u);
  switch (axis) {
    case RotationAxis::X: return make_1q(GateKind::RX, q, angle);
    case RotationAxis::Y: return make_1q(GateKind::RY, q, angle);
    case RotationAxis::Z: return make_1q(GateKind::RZ, q, angle);
  }
  throw std::invalid_argument("FreeEvolution: unknown axis");
}

Mat2 FreeEvolution::matrix() const { return Mat2(gate_matrix(op(0))); }

// ── Interaction ──────────────────────────────────────────────────────────────

Interaction Interaction::deterministic(DetUSpec spec) {
  Interaction i;
  i.kind = Kind::Deterministic;
  i.det = spec;
  return i;
}

Interaction Interaction::random_u(const RandomUnitarySpec& spec) {
  Interaction i;
  i.kind = Kind::Random;
  i.random = spec;
  return i;
}

Interaction Interaction::custom_u(const Mat4& u_target_first) {
  if (!is_unitary(u_target_first, kUnitaryTol))
    throw std::invalid_argument("Interaction: matrix not unitary");
  Interaction i;
  i.kind = Kind::Custom;
  i.custom = u_target_first;
  return i;
}

std::vector<GateOp> Interaction::compile(int probe, int target) const {
  switch (kind) {
    case Kind::Deterministic: return compile_deterministic_U(det, probe, target);
    case Kind::Random: return compile_random_U(random, probe, target);
    case Kind::Custom: return compile_custom_U(custom, probe, target);
  }
  throw std::invalid_argument("Interaction: unknown kind");
}

Mat4 Interaction::matrix() const {
  switch (kind) {
    case Kind::Deterministic: return deterministic_U_matrix(det);
    case Kind::Random: return random_U_matrix(random);
    case Kind::Custom: return custom;
  }
  throw std::invalid_argument("Interaction: unknown kind");
}

// ── ProtocolConfig ───────────────────────────────────────────────────────────

ProjectorMode ProtocolConfig::resolved_projector_mode() const {
  if (projector_mode != ProjectorMode::Auto) return projector_mode;
  return interaction.kind == Interaction::Kind::Deterministic ? ProjectorMode::Reduced3
                                                              : ProjectorMode::Full6;
}

void ProtocolConfig::validate() const {
  std::array<int, 4> sorted = probe_order;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != kProbeSlots)
    throw std::invalid_argument("ProtocolConfig: probe_order must permute slots {0,1,3,4}");
  if (n_rounds != 4)
    throw std::invalid_argument("ProtocolConfig: the W4 protocol has exactly 4 rounds");
}

// ── Success subspace ─────────────────────────────────────────────────────────

SuccessSubspace success_projector(ProjectorMode mode) {
  if (mode == ProjectorMode::Auto)
    throw std::invalid_argument("success_projector: mode must be resolved");

  auto sym = [](std::initializer_list<int> kets) {
    Vec v = Vec::Zero(16);
    for (int k : kets) v(k) = 1.0;
    v.normalize();
    return v;
  };

  SuccessSubspace s;
  s.basis.push_back(sym({0b0000}));
  s.basis.push_back(sym({0b1111}));
  s.basis.push_back(sym({0b0011, 0b1100}));
  if (mode == ProjectorMode::Full6) {
    s.basis.push_back(sym({0b1000, 0b0100, 0b0010, 0b0001}));
    s.basis.push_back(sym({0b0111, 0b1011, 0b1101, 0b1110}));
    s.basis.push_back(sym({0b1010, 0b0101, 0b1001, 0b0110}));
  }
  s.projector = Mat::Zero(16, 16);
  for (const Vec& v : s.basis) s.projector += v * v.adjoint();
  return s;
}

Mat lift_to_device(const SuccessSubspace& s, const std::array<int, 4>& probe_order) {
  auto logical_index = [&probe_order](int device_index) {
    int l = 0;
    for (int r = 0; r < 4; ++r)
      l |= device_bit(device_index, probe_order[static_cast<size_t>(r)]) << (3 - r);
    return l;
  };
  Mat p = Mat::Zero(32, 32);
  for (int d = 0; d < 32; ++d) {
    for (int e = 0; e < 32; ++e) {
      if (device_bit(d, kTargetSlot) != device_bit(e, kTargetSlot)) continue;
      p(d, e) = s.projector(logical_index(d), logical_index(e));
    }
  }
  return p;
}

// ── Circuit construction ─────────────────────────────────────────────────────

Circuit build_prep_circuit(const ProtocolConfig& cfg) {
  cfg.validate();
  Circuit c;
  c.n_qubits = kNumQubits;
  // G1 = RZ(φ)·RY(θ) up to global phase: two native rotations at most.
  if (std::abs(cfg.initial_target.theta) > 1e-12)
    c.ops.push_back(make_1q(GateKind::RY, kTargetSlot, cfg.initial_target.theta));
  if (std::abs(cfg.initial_target.phi) > 1e-12)
    c.ops.push_back(make_1q(GateKind::RZ, kTargetSlot, cfg.initial_target.phi));
  for (const GateOp& g : compile_singlet_prep(0, 1)) c.ops.push_back(g);
  for (const GateOp& g : compile_singlet_prep(3, 4)) c.ops.push_back(g);
  schedule(c);
  return c;
}

Circuit build_rounds_circuit(const ProtocolConfig& cfg) {
  cfg.validate();
  Circuit c;
  c.n_qubits = kNumQubits;
  const bool trivial_r =
      cfg.free_evolution.is_rotation && std::abs(cfg.free_evolution.angle) < 1e-12;
  for (int r = 0; r < cfg.n_rounds; ++r) {
    if (!trivial_r) c.ops.push_back(cfg.free_evolution.op(kTargetSlot));
    const int slot = cfg.probe_order[static_cast<size_t>(r)];
    const int near = slot == 0 ? 1 : (slot == 4 ? 3 : slot);
    for (const GateOp& g : cfg.interaction.compile(near, kTargetSlot)) c.ops.push_back(g);
    if (slot == 0)
      for (const GateOp& g : compile_swap(0, 1)) c.ops.push_back(g);
    else if (slot == 4)
      for (const GateOp& g : compile_swap(3, 4)) c.ops.push_back(g);
  }
  schedule(c);
  return c;
}

Circuit build_protocol_circuit(const ProtocolConfig& cfg) {
  const Circuit prep = build_prep_circuit(cfg);
  const Circuit rounds = build_rounds_circuit(cfg);
  Circuit c;
  c.n_qubits = kNumQubits;
  c.ops = prep.ops;
  c.ops.insert(c.ops.end(), rounds.ops.begin(), rounds.ops.end());
  schedule(c);
  return c;
}

// ── Protocol execution ───────────────────────────────────────────────────────

RunResult run_protocol(const ProtocolConfig& cfg) {
  cfg.validate();
  const Circuit prep = build_prep_circuit(cfg);
  const Circuit rounds = build_rounds_circuit(cfg);

  const DensityMatrix rho0 = cfg.initial_target.ideal_state();
  const Mat p5 = lift_to_device(success_projector(cfg.resolved_projector_mode()),
                                cfg.probe_order);

  RunResult out;
  out.depth_report = build_protocol_circuit(cfg).depth();

  Mat rho_f;
  if (!cfg.noise && !cfg.initial_target.mixed) {
    // Statevector fast path.
    StateVector psi = StateVector::basis(kNumQubits, 0);
    psi = apply_noiseless(prep, psi);
    out.initial_trace_distance = trace_distance(
        partial_trace(DensityMatrix::pure(psi), {kTargetSlot}), rho0);
    psi = apply_noiseless(rounds, psi);
    rho_f = psi.amps * psi.amps.adjoint();
  } else {
    DensityMatrix rho = DensityMatrix::pure(StateVector::basis(kNumQubits, 0));
    if (cfg.noise)
      rho = apply_noisy(prep, rho, *cfg.noise);
    else
      apply_exact(prep, rho);
    if (cfg.initial_target.mixed) {
      const TargetPrep& tp = cfg.initial_target;
      const KrausChannel idle = combined_channel(clamp01(tp.idle_us / tp.idle_t1_us),
                                                 clamp01(tp.idle_us / tp.idle_tphi_us));
      rho = apply_channel(idle, rho, kTargetSlot);
    }
    out.initial_trace_distance = trace_distance(partial_trace(rho, {kTargetSlot}), rho0);
    if (cfg.noise)
      rho = apply_noisy(rounds, rho, *cfg.noise);
    else
      apply_exact(rounds, rho);
    rho_f = rho.m;
  }

  const double p_born = std::real((p5 * rho_f).trace());
  if (p_born < kResetSuccessFloor) throw ResetNeverSucceeds(0.0);

  const Mat rho_ps = (p5 * rho_f * p5) / p_born;
  out.p_success = p_born;
  out.p_success_literal = std::real((rho_f * rho_ps).trace());
  out.rho_final = make_physical(rho_f);
  out.rho_reset = make_physical(partial_trace_raw(rho_ps, kNumQubits, {kTargetSlot}));
  out.trace_distance_to_initial = trace_distance(out.rho_reset, rho0);
  out.fidelity_to_initial = fidelity(out.rho_reset, rho0);
  return out;
}

std::vector<DensityMatrix> run_no_reset_baseline(const ProtocolConfig& cfg,
                                                 double total_angle) {
  if (!cfg.free_evolution.is_rotation)
    throw std::invalid_argument("run_no_reset_baseline: free evolution must be a rotation");
  const double step = cfg.free_evolution.angle;
  int n_steps = 4;
  if (std::abs(step) > 1e-15) {
    n_steps = static_cast<int>(std::lround(total_angle / step));
    n_steps = std::max(1, n_steps);
  }
  const Mat2 r = cfg.free_evolution.matrix();
  DensityMatrix rho = cfg.initial_target.ideal_state();
  std::vector<DensityMatrix> trajectory;
  trajectory.reserve(static_cast<size_t>(n_steps));
  for (int k = 0; k < n_steps; ++k) {
    rho.m = r * rho.m * r.adjoint();
    if (cfg.noise)
      rho = apply_channel(cfg.noise->channel_for(kTargetSlot, cfg.noise->single_ns), rho, 0);
    trajectory.push_back(rho);
  }
  return trajectory;
}

// ── Probe-order discovery ────────────────────────────────────────────────────

std::vector<std::array<int, 4>> discover_probe_orders(int n_trials, std::uint64_t seed) {
  std::array<int, 4> perm = kProbeSlots;  // sorted: lexicographic enumeration
  std::vector<std::array<int, 4>> passing;
  do {
    bool ok = true;
    int successes = 0;
    for (int t = 0; t < n_trials && ok; ++t) {
      Rng rng(derive_seed(seed, "probe-order", static_cast<std::uint64_t>(t)));
      ProtocolConfig cfg;
      cfg.probe_order = perm;
      cfg.projector_mode = ProjectorMode::Full6;
      cfg.initial_target =
          TargetPrep::pure(std::acos(1.0 - 2.0 * rng.uniform()), rng.uniform(0.0, 2 * M_PI));
      cfg.free_evolution = FreeEvolution::unitary(
          Mat2(gate_matrix(make_1q(GateKind::RZ, 0, rng.uniform(0.0, 2 * M_PI))) *
               gate_matrix(make_1q(GateKind::RY, 0, rng.uniform(0.0, M_PI))) *
               gate_matrix(make_1q(GateKind::RZ, 0, rng.uniform(0.0, 2 * M_PI)))));
      RandomUnitarySpec spec;
      for (double& a : spec.angles) a = rng.uniform(0.0, 2 * M_PI);
      cfg.interaction = Interaction::random_u(spec);
      try {
        const RunResult r = run_protocol(cfg);
        if (r.p_success >= 1e-6) {
          ++successes;
          if (r.trace_distance_to_initial >= 1e-8) ok = false;
        }
      } catch (const ResetNeverSucceeds&) {
        // p = 0: tells us nothing about this order.
      }
    }
    if (ok && successes > 0) passing.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return passing;
}

std::array<int, 4> discover_probe_order(int n_trials, std::uint64_t seed) {
  const auto orders = discover_probe_orders(n_trials, seed);
  if (orders.empty())
    throw std::runtime_error("discover_probe_order: no probe order satisfies the resetting test");
  return orders.front();
}

}  // namespace qreset
