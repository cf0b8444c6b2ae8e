#include "qreset/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace qreset {

namespace {

// Hot path shared by apply_channel and the layer loop; the channel is
// validated once by the caller.
void conjugate_channel(Mat& rho, int n_qubits, int q, const KrausChannel& ch) {
  Mat acc = Mat::Zero(rho.rows(), rho.cols());
  for (const Mat& k : ch.ops) {
    Mat term = rho;
    conjugate_1q_inplace(term, n_qubits, q, Mat2(k));
    acc += term;
  }
  rho = std::move(acc);
}

}  // namespace

// ── Channel construction ─────────────────────────────────────────────────────

bool is_trace_preserving(const KrausChannel& ch, double tol) {
  if (ch.ops.empty()) return false;
  const int d = ch.dim();
  Mat acc = Mat::Zero(d, d);
  for (const Mat& k : ch.ops) acc += k.adjoint() * k;
  return (acc - Mat::Identity(d, d)).cwiseAbs().maxCoeff() <= tol;
}

KrausChannel amplitude_damping(double gamma) {
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("amplitude_damping: gamma outside [0, 1]");
  Mat e1 = Mat::Zero(2, 2), e2 = Mat::Zero(2, 2);
  e1(0, 0) = 1.0;
  e1(1, 1) = std::sqrt(1.0 - gamma);
  e2(0, 1) = std::sqrt(gamma);
  return KrausChannel{{e1, e2}};
}

KrausChannel dephasing(double gamma_phi) {
  if (gamma_phi < 0.0 || gamma_phi > 1.0)
    throw std::invalid_argument("dephasing: gamma_phi outside [0, 1]");
  Mat e3 = Mat::Zero(2, 2), e4 = Mat::Zero(2, 2);
  e3(0, 0) = 1.0;
  e3(1, 1) = std::sqrt(1.0 - gamma_phi);
  e4(1, 1) = std::sqrt(gamma_phi);
  return KrausChannel{{e3, e4}};
}

KrausChannel combined_channel(double gamma, double gamma_phi) {
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("combined_channel: gamma outside [0, 1]");
  if (gamma_phi < 0.0 || gamma_phi > 1.0)
    throw std::invalid_argument("combined_channel: gamma_phi outside [0, 1]");
  // Damping elements composed with dephasing ones (E1E3, E1E4, E2E3, E2E4),
  // written out directly.
  Mat k1 = Mat::Zero(2, 2), k2 = Mat::Zero(2, 2), k3 = Mat::Zero(2, 2), k4 = Mat::Zero(2, 2);
  k1(0, 0) = 1.0;
  k1(1, 1) = std::sqrt((1.0 - gamma) * (1.0 - gamma_phi));
  k2(1, 1) = std::sqrt(gamma_phi * (1.0 - gamma));
  k3(0, 1) = std::sqrt(gamma * (1.0 - gamma_phi));
  k4(0, 1) = std::sqrt(gamma * gamma_phi);
  return KrausChannel{{k1, k2, k3, k4}};
}

DensityMatrix apply_channel(const KrausChannel& ch, const DensityMatrix& rho, int qubit) {
  const int n = rho.qubits();
  if (qubit < 0 || qubit >= n)
    throw std::invalid_argument("apply_channel: qubit out of range");
  if (ch.dim() != 2)
    throw std::invalid_argument("apply_channel: expected a 1-qubit channel");
  if (!is_trace_preserving(ch))
    throw std::invalid_argument("apply_channel: channel violates completeness");
  DensityMatrix out = rho;
  conjugate_channel(out.m, n, qubit, ch);
  return out;
}

// ── Noise model ──────────────────────────────────────────────────────────────

double NoiseModel::t1_of(int q) const {
  if (!t1_us.empty()) {
    if (q < 0 || q >= static_cast<int>(t1_us.size()))
      throw std::out_of_range("NoiseModel::t1_of: qubit out of range");
    return t1_us[static_cast<size_t>(q)];
  }
  return default_t1_us;
}

double NoiseModel::tphi_of(int q) const {
  if (!tphi_us.empty()) {
    if (q < 0 || q >= static_cast<int>(tphi_us.size()))
      throw std::out_of_range("NoiseModel::tphi_of: qubit out of range");
    return tphi_us[static_cast<size_t>(q)];
  }
  return default_tphi_us;
}

double NoiseModel::layer_duration_ns(DurationClass c) const {
  return c == DurationClass::Single ? single_ns : double_ns;
}

double NoiseModel::weight(double duration_ns, double t_us) const {
  if (t_us <= 0.0) return 1.0;  // degenerate: instantly decohered
  const double ratio = (duration_ns * 1e-3) / t_us;
  if (exponential_weights) return 1.0 - std::exp(-ratio);
  return std::min(1.0, std::max(0.0, ratio));
}

KrausChannel NoiseModel::channel_for(int q, double duration_ns) const {
  return combined_channel(weight(duration_ns, t1_of(q)), weight(duration_ns, tphi_of(q)));
}

KrausChannel idle_channel(double duration_us, const NoiseModel& model, int qubit) {
  if (duration_us < 0.0)
    throw std::invalid_argument("idle_channel: negative duration");
  return model.channel_for(qubit, duration_us * 1e3);
}

// ── Layered simulation ───────────────────────────────────────────────────────

DensityMatrix apply_noisy_layer(const Circuit& c, const Layer& layer,
                                DensityMatrix rho, const NoiseModel& model) {
  const int n = rho.qubits();
  if (n != c.n_qubits)
    throw std::invalid_argument("apply_noisy_layer: qubit count mismatch");

  std::uint32_t touched = 0;
  for (int idx : layer.op_indices) {
    const GateOp& op = c.ops[static_cast<size_t>(idx)];
    const Mat u = gate_matrix(op);
    if (op.n_qubits() == 1) {
      conjugate_1q_inplace(rho.m, n, op.q[0], Mat2(u));
      touched |= 1u << op.q[0];
    } else {
      conjugate_2q_inplace(rho.m, n, op.q[0], op.q[1], Mat4(u));
      touched |= (1u << op.q[0]) | (1u << op.q[1]);
    }
  }

  const double dur = model.layer_duration_ns(layer.dclass);
  for (int q = 0; q < n; ++q) {
    const bool driven = (touched >> q) & 1u;
    if (driven || model.idle_decoherence)
      conjugate_channel(rho.m, n, q, model.channel_for(q, dur));
  }
  return rho;
}

DensityMatrix apply_noisy(const Circuit& c, const DensityMatrix& rho_in,
                          const NoiseModel& model) {
  const Circuit* cp = &c;
  Circuit scratch;
  if (!c.scheduled) {
    scratch = c;
    schedule(scratch);
    cp = &scratch;
  }
  DensityMatrix rho = rho_in;
  for (const Layer& l : cp->layers) rho = apply_noisy_layer(*cp, l, std::move(rho), model);
  return rho;
}

}  // namespace qreset
