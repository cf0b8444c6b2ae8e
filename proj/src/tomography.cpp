#include "qreset/tomography.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace qreset {

namespace {

constexpr double kCptpStepTol = 1e-10;
constexpr double kCptpTpTol = 1e-6;
constexpr int kCptpMaxIter = 10000;

int pow_int(int base, int exp) {
  int r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

int letter_index(char c) {
  switch (c) {
    case 'X': return 0;
    case 'Y': return 1;
    case 'Z': return 2;
  }
  throw std::invalid_argument("tomography: setting letter must be X, Y, or Z");
}

// Basis rotation V with V (eigenbasis of the letter) = computational basis.
Mat2 basis_rotation(char letter) {
  Mat2 h;
  h << 1, 1, 1, -1;
  h /= std::sqrt(2.0);
  if (letter == 'X') return h;
  if (letter == 'Y') {
    Mat2 sdg;
    sdg << 1, 0, 0, cplx(0, -1);
    return Mat2(h * sdg);
  }
  return Mat2::Identity();
}

// Born probabilities of measuring `rho` in the basis given by `setting`.
std::vector<double> born_probabilities(const DensityMatrix& rho, const std::string& setting) {
  const int n = rho.qubits();
  Mat rotated = rho.m;
  for (int q = 0; q < n; ++q) {
    const char letter = setting[static_cast<size_t>(q)];
    if (letter != 'Z') conjugate_1q_inplace(rotated, n, q, basis_rotation(letter));
  }
  std::vector<double> p(static_cast<size_t>(rho.dim()));
  double sum = 0.0;
  for (int b = 0; b < rho.dim(); ++b) {
    p[static_cast<size_t>(b)] = std::max(0.0, std::real(rotated(b, b)));
    sum += p[static_cast<size_t>(b)];
  }
  if (sum <= 0.0) throw std::invalid_argument("born_probabilities: zero-trace state");
  for (double& x : p) x /= sum;
  return p;
}

// Draw a multinomial sample as a chain of binomials.
std::vector<double> multinomial(const std::vector<double>& p, long long shots, Rng& rng) {
  std::vector<double> counts(p.size(), 0.0);
  long long remaining = shots;
  double tail = 1.0;
  for (size_t b = 0; b + 1 < p.size() && remaining > 0; ++b) {
    const double rel = tail > 0.0 ? std::clamp(p[b] / tail, 0.0, 1.0) : 0.0;
    std::binomial_distribution<long long> dist(remaining, rel);
    const long long k = dist(rng);
    counts[b] = static_cast<double>(k);
    remaining -= k;
    tail -= p[b];
  }
  counts.back() += static_cast<double>(remaining);
  return counts;
}

// One nonzero entry per row of a Pauli matrix: bit b maps to column bit and value.
inline void pauli_row(int digit, int b, int& col_bit, cplx& val) {
  switch (digit) {
    case 0: col_bit = b; val = 1.0; return;                          // I
    case 1: col_bit = 1 - b; val = 1.0; return;                      // X
    case 2: col_bit = 1 - b; val = b ? cplx(0, 1) : cplx(0, -1); return;  // Y
    default: col_bit = b; val = b ? -1.0 : 1.0; return;              // Z
  }
}

// Accumulate acc += w · (⊗_i P_{digit_i}) using one entry per row.
void add_pauli_string(Mat& acc, const std::vector<int>& digits, cplx w) {
  const int n = static_cast<int>(digits.size());
  const int dim = 1 << n;
  for (int r = 0; r < dim; ++r) {
    int c = 0;
    cplx v = w;
    for (int q = 0; q < n; ++q) {
      const int b = (r >> (n - 1 - q)) & 1;
      int cb;
      cplx pv;
      pauli_row(digits[static_cast<size_t>(q)], b, cb, pv);
      c |= cb << (n - 1 - q);
      v *= pv;
    }
    acc(r, c) += v;
  }
}

std::string bitstring(int value, int n) {
  std::string s(static_cast<size_t>(n), '0');
  for (int q = 0; q < n; ++q)
    if ((value >> (n - 1 - q)) & 1) s[static_cast<size_t>(q)] = '1';
  return s;
}

Mat tp_constraint_matrix() {
  // Rows indexed by entry (a,b) of Σ_{mn} χ_{mn} P_n P_m; columns by k = 4m+n.
  Mat a = Mat::Zero(4, 16);
  for (int m = 0; m < 4; ++m) {
    for (int n = 0; n < 4; ++n) {
      const Mat prod = Mat(pauli(n)) * Mat(pauli(m));
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) a(2 * r + c, 4 * m + n) = prod(r, c);
    }
  }
  return a;
}

double tp_residual(const Mat& chi) {
  Mat acc = Mat::Zero(2, 2);
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n) acc += chi(m, n) * Mat(pauli(n)) * Mat(pauli(m));
  return (acc - Mat::Identity(2, 2)).cwiseAbs().maxCoeff();
}

}  // namespace

// ── State tomography ─────────────────────────────────────────────────────────

std::vector<std::string> all_settings(int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits)
    throw std::invalid_argument("all_settings: qubit count out of range");
  const int total = pow_int(3, n_qubits);
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(total));
  for (int s = 0; s < total; ++s) {
    std::string str(static_cast<size_t>(n_qubits), 'X');
    int v = s;
    for (int q = n_qubits - 1; q >= 0; --q) {
      str[static_cast<size_t>(q)] = "XYZ"[v % 3];
      v /= 3;
    }
    out.push_back(std::move(str));
  }
  return out;
}

std::vector<MeasurementRecord> sample_measurements(const DensityMatrix& rho,
                                                   long long shots, std::uint64_t seed) {
  const int n = rho.qubits();
  const std::vector<std::string> settings = all_settings(n);
  std::vector<MeasurementRecord> out;
  out.reserve(settings.size());
  for (size_t si = 0; si < settings.size(); ++si) {
    MeasurementRecord rec;
    rec.setting = settings[si];
    const std::vector<double> p = born_probabilities(rho, rec.setting);
    if (shots <= 0) {
      rec.exact = true;
      rec.shots = 0;
      rec.counts = p;
    } else {
      rec.shots = shots;
      Rng rng(derive_seed(seed, "qst-setting", static_cast<std::uint64_t>(si)));
      rec.counts = multinomial(p, shots, rng);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

Mat qst_linear_inversion(const std::vector<MeasurementRecord>& records) {
  if (records.empty())
    throw std::invalid_argument("qst_linear_inversion: no measurement records");
  const int n = records.front().qubits();
  const int dim = 1 << n;
  const int n_settings = pow_int(3, n);
  const int n_paulis = pow_int(4, n);

  std::set<std::string> seen;
  for (const MeasurementRecord& r : records) {
    if (r.qubits() != n)
      throw std::invalid_argument("qst_linear_inversion: mixed qubit counts");
    if (static_cast<int>(r.counts.size()) != dim)
      throw std::invalid_argument("qst_linear_inversion: count vector has wrong length");
    seen.insert(r.setting);
  }
  if (static_cast<int>(seen.size()) != n_settings)
    throw std::invalid_argument("qst_linear_inversion: incomplete measurement settings");

  std::vector<double> acc(static_cast<size_t>(n_paulis), 0.0);
  std::vector<int> cnt(static_cast<size_t>(n_paulis), 0);

  for (const MeasurementRecord& r : records) {
    const double total = r.exact ? 1.0 : static_cast<double>(r.shots);
    std::vector<double> freq(static_cast<size_t>(dim));
    for (int b = 0; b < dim; ++b) freq[static_cast<size_t>(b)] = r.counts[static_cast<size_t>(b)] / total;

    for (int mask = 0; mask < dim; ++mask) {
      double e = 0.0;
      for (int b = 0; b < dim; ++b)
        e += (std::popcount(static_cast<unsigned>(b & mask)) & 1) ? -freq[static_cast<size_t>(b)]
                                                                  : freq[static_cast<size_t>(b)];
      int p_index = 0;
      for (int q = 0; q < n; ++q) {
        const int bit = (mask >> (n - 1 - q)) & 1;
        const int digit = bit ? 1 + letter_index(r.setting[static_cast<size_t>(q)]) : 0;
        p_index = p_index * 4 + digit;
      }
      acc[static_cast<size_t>(p_index)] += e;
      cnt[static_cast<size_t>(p_index)] += 1;
    }
  }

  Mat rho_raw = Mat::Zero(dim, dim);
  std::vector<int> digits(static_cast<size_t>(n));
  for (int p = 0; p < n_paulis; ++p) {
    int v = p;
    for (int q = n - 1; q >= 0; --q) {
      digits[static_cast<size_t>(q)] = v & 3;
      v >>= 2;
    }
    const double mean = acc[static_cast<size_t>(p)] / static_cast<double>(cnt[static_cast<size_t>(p)]);
    add_pauli_string(rho_raw, digits, mean / static_cast<double>(dim));
  }
  return rho_raw;
}

DensityMatrix cp_project(const Mat& rho_raw) {
  if ((rho_raw - rho_raw.adjoint()).cwiseAbs().maxCoeff() > 1e-8)
    throw std::invalid_argument("cp_project: input not Hermitian");
  if (std::abs(rho_raw.trace() - cplx(1.0)) > 1e-8)
    throw std::invalid_argument("cp_project: input trace must be 1");

  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (rho_raw + rho_raw.adjoint()));
  Eigen::VectorXd vals = es.eigenvalues();  // ascending
  const int d = static_cast<int>(vals.size());
  double deficit = 0.0;
  int k = 0;
  while (k < d && vals(k) + deficit / static_cast<double>(d - k) < 0.0) {
    deficit += vals(k);
    vals(k) = 0.0;
    ++k;
  }
  for (int i = k; i < d; ++i) vals(i) += deficit / static_cast<double>(d - k);

  Mat rho = es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint();
  return make_physical(rho);
}

// ── Process tomography ───────────────────────────────────────────────────────

const std::array<DensityMatrix, 4>& standard_qpt_inputs() {
  static const std::array<DensityMatrix, 4> inputs = {
      DensityMatrix::pure(bloch_state(0.0, 0.0)),           // |0⟩
      DensityMatrix::pure(bloch_state(M_PI, 0.0)),          // |1⟩
      DensityMatrix::pure(bloch_state(M_PI / 2, 0.0)),      // |+⟩
      DensityMatrix::pure(bloch_state(M_PI / 2, M_PI / 2))  // |i⟩
  };
  return inputs;
}

ChiMatrix qpt_chi(const std::array<DensityMatrix, 4>& inputs,
                  const std::array<DensityMatrix, 4>& outputs) {
  Mat a = Mat::Zero(16, 16);
  Vec b = Vec::Zero(16);
  for (int i = 0; i < 4; ++i) {
    if (inputs[static_cast<size_t>(i)].dim() != 2 || outputs[static_cast<size_t>(i)].dim() != 2)
      throw std::invalid_argument("qpt_chi: expected 1-qubit states");
    for (int m = 0; m < 4; ++m) {
      for (int n = 0; n < 4; ++n) {
        const Mat term = Mat(pauli(m)) * inputs[static_cast<size_t>(i)].m * Mat(pauli(n));
        for (int r = 0; r < 2; ++r)
          for (int c = 0; c < 2; ++c) a(4 * i + 2 * r + c, 4 * m + n) = term(r, c);
      }
    }
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) b(4 * i + 2 * r + c) = outputs[static_cast<size_t>(i)].m(r, c);
  }

  Eigen::ColPivHouseholderQR<Mat> qr(a);
  if (qr.rank() < 16)
    throw std::invalid_argument("qpt_chi: degenerate input preparations");
  const Vec x = qr.solve(b);

  ChiMatrix chi;
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n) chi.m(m, n) = x(4 * m + n);
  chi.m = 0.5 * (chi.m + chi.m.adjoint()).eval();
  return chi;
}

ChiMatrix cptp_project(const ChiMatrix& chi_raw) {
  if ((chi_raw.m - chi_raw.m.adjoint()).cwiseAbs().maxCoeff() > kHermTol)
    throw std::invalid_argument("cptp_project: input not Hermitian");

  const Mat a = tp_constraint_matrix();
  const Mat gram = a * a.adjoint();
  const Eigen::PartialPivLU<Mat> gram_lu(gram);
  Vec target = Vec::Zero(4);
  target(0) = 1.0;
  target(3) = 1.0;

  auto project_psd = [](const Mat& x) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (x + x.adjoint()));
    Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0);
    return Mat(es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint());
  };
  auto project_tp = [&](const Mat& x) {
    Vec v(16);
    for (int m = 0; m < 4; ++m)
      for (int n = 0; n < 4; ++n) v(4 * m + n) = x(m, n);
    const Vec corr = a.adjoint() * gram_lu.solve(a * v - target);
    v -= corr;
    Mat y(4, 4);
    for (int m = 0; m < 4; ++m)
      for (int n = 0; n < 4; ++n) y(m, n) = v(4 * m + n);
    return Mat(0.5 * (y + y.adjoint()));
  };

  Mat x = chi_raw.m;
  Mat p = Mat::Zero(4, 4), q = Mat::Zero(4, 4);
  for (int it = 0; it < kCptpMaxIter; ++it) {
    const Mat x_prev = x;
    const Mat y = project_psd(x + p);
    p = x + p - y;
    x = project_tp(y + q);
    q = y + q - x;
    if ((x - x_prev).norm() < kCptpStepTol && it > 0) break;
  }

  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (x + x.adjoint()));
  const double min_eig = es.eigenvalues().minCoeff();
  const double tp_res = tp_residual(x);
  if (min_eig < kPsdTol || tp_res > kCptpTpTol) {
    std::ostringstream msg;
    msg << "cptp_project: did not converge; min eigenvalue " << min_eig
        << ", trace-preservation residual " << tp_res;
    throw ConvergenceError(msg.str());
  }

  ChiMatrix out;
  out.m = 0.5 * (x + x.adjoint());
  out.cptp_projected = true;
  return out;
}

double process_fidelity(const ChiMatrix& chi) { return std::real(chi.m(0, 0)); }

// ── Bootstrap ────────────────────────────────────────────────────────────────

BootstrapReport bootstrap_qpt(const std::array<DensityMatrix, 4>& rho_f_per_input,
                              const Mat& lifted_projector, int target_slot,
                              const BootstrapOptions& opt) {
  const int n = rho_f_per_input.front().qubits();
  if (target_slot < 0 || target_slot >= n)
    throw std::invalid_argument("bootstrap_qpt: target slot out of range");
  if (lifted_projector.rows() != rho_f_per_input.front().dim())
    throw std::invalid_argument("bootstrap_qpt: projector dimension mismatch");
  if (opt.n_sets < 1) throw std::invalid_argument("bootstrap_qpt: n_sets must be positive");

  const std::vector<std::string> settings = all_settings(n);

  // Born probability tables, one per (input, setting): the expensive rotations
  // happen once, not once per replica.
  std::array<std::vector<std::vector<double>>, 4> tables;
  for (int i = 0; i < 4; ++i) {
    tables[static_cast<size_t>(i)].reserve(settings.size());
    for (const std::string& s : settings)
      tables[static_cast<size_t>(i)].push_back(
          born_probabilities(rho_f_per_input[static_cast<size_t>(i)], s));
  }

  auto replica_fidelity = [&](int replica) {
    std::array<DensityMatrix, 4> outputs;
    for (int i = 0; i < 4; ++i) {
      std::vector<MeasurementRecord> records;
      records.reserve(settings.size());
      Rng rng(derive_seed(opt.seed, "bootstrap-replica",
                          static_cast<std::uint64_t>(replica) * 4 + static_cast<std::uint64_t>(i)));
      for (size_t si = 0; si < settings.size(); ++si) {
        MeasurementRecord rec;
        rec.setting = settings[si];
        const std::vector<double>& p = tables[static_cast<size_t>(i)][si];
        if (opt.shots <= 0) {
          rec.exact = true;
          rec.counts = p;
        } else {
          rec.shots = opt.shots;
          rec.counts = multinomial(p, opt.shots, rng);
        }
        records.push_back(std::move(rec));
      }

      Mat state = qst_linear_inversion(records);
      if (opt.cp_before_subspace) state = cp_project(state).m;
      const Mat projected = lifted_projector * state * lifted_projector;
      const double ps = std::real(projected.trace());
      if (ps < 1e-12)
        throw std::runtime_error("bootstrap_qpt: replica success probability below 1e-12");
      Mat reset = partial_trace_raw(projected / ps, n, {target_slot});
      if (!opt.cp_before_subspace) reset = cp_project(reset).m;
      outputs[static_cast<size_t>(i)] = make_physical(reset);
    }
    const ChiMatrix chi = cptp_project(qpt_chi(standard_qpt_inputs(), outputs));
    return process_fidelity(chi);
  };

  BootstrapReport report;
  report.n_sets = opt.n_sets;
  report.shots_per_setting = std::max<long long>(opt.shots, 0);
  report.fidelity_samples.reserve(static_cast<size_t>(opt.n_sets));
  if (opt.shots <= 0) {
    // Exact expectations: every replica is identical by construction.
    const double f = replica_fidelity(0);
    report.fidelity_samples.assign(static_cast<size_t>(opt.n_sets), f);
  } else {
    for (int r = 0; r < opt.n_sets; ++r) report.fidelity_samples.push_back(replica_fidelity(r));
  }

  double mean = 0.0;
  for (double f : report.fidelity_samples) mean += f;
  mean /= static_cast<double>(report.fidelity_samples.size());
  double var = 0.0;
  for (double f : report.fidelity_samples) var += (f - mean) * (f - mean);
  if (report.fidelity_samples.size() > 1)
    var /= static_cast<double>(report.fidelity_samples.size() - 1);
  report.mean_fidelity = mean;
  report.error_bar = 1.96 * std::sqrt(var);
  return report;
}

// ── Record CSV round-trip ────────────────────────────────────────────────────

void write_records_csv(std::ostream& out, const std::vector<MeasurementRecord>& records) {
  out << "setting,bitstring,count\n";
  char buf[64];
  for (const MeasurementRecord& r : records) {
    for (size_t b = 0; b < r.counts.size(); ++b) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.counts[b]);
      out << r.setting << ',' << bitstring(static_cast<int>(b), r.qubits()) << ',' << buf
          << '\n';
    }
  }
}

std::vector<MeasurementRecord> read_records_csv(std::istream& in) {
  std::vector<MeasurementRecord> out;
  std::map<std::string, size_t> index;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "setting,bitstring,count") continue;
    std::istringstream ls(line);
    std::string setting, bits, value;
    if (!std::getline(ls, setting, ',') || !std::getline(ls, bits, ',') ||
        !std::getline(ls, value))
      throw std::invalid_argument("read_records_csv: malformed line: " + line);
    const int n = static_cast<int>(bits.size());
    auto [it, inserted] = index.try_emplace(setting, out.size());
    if (inserted) {
      MeasurementRecord rec;
      rec.setting = setting;
      rec.counts.assign(1ull << n, 0.0);
      out.push_back(std::move(rec));
    }
    MeasurementRecord& rec = out[it->second];
    if (static_cast<int>(rec.setting.size()) != n)
      throw std::invalid_argument("read_records_csv: inconsistent bitstring length");
    int b = 0;
    for (char c : bits) {
      if (c != '0' && c != '1')
        throw std::invalid_argument("read_records_csv: bad bitstring: " + bits);
      b = (b << 1) | (c == '1');
    }
    rec.counts[static_cast<size_t>(b)] = std::stod(value);
  }
  for (MeasurementRecord& rec : out) {
    double sum = 0.0;
    bool integral = true;
    for (double c : rec.counts) {
      sum += c;
      if (std::abs(c - std::round(c)) > 1e-9) integral = false;
    }
    if (integral) {
      rec.shots = std::llround(sum);
    } else {
      rec.exact = true;
      rec.shots = 0;
    }
  }
  return out;
}

}  // namespace qreset
