// Tomography: settings enumeration, sampled/exact measurement, linear
// inversion, physical projections, process tomography, and bootstrap.
#include <doctest.h>

#include <cmath>
#include <complex>
#include <sstream>

#include "oracles.hpp"
#include "qreset/protocol.hpp"
#include "qreset/tomography.hpp"

using namespace qreset;

namespace {

constexpr double kPi = 3.14159265358979323846;

// ε(ρ) = (1−p)ρ + p I/2, applied to the standard inputs.
std::array<DensityMatrix, 4> depolarized_outputs(double p) {
  std::array<DensityMatrix, 4> out;
  const auto& in = standard_qpt_inputs();
  for (size_t k = 0; k < 4; ++k) {
    Mat m = (1.0 - p) * in[k].m + (p / 2.0) * Mat::Identity(2, 2);
    out[k] = DensityMatrix(m);
  }
  return out;
}

double tp_residual(const Mat& chi) {
  const oracle::OMat paulis[4] = {oracle::id2(), oracle::px(), oracle::py(), oracle::pz()};
  oracle::OMat acc = oracle::OMat::Zero(2, 2);
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n) acc += chi(m, n) * (paulis[n] * paulis[m]);
  return (acc - oracle::OMat::Identity(2, 2)).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("setting enumeration is lexicographic") {
  const auto one = all_settings(1);
  REQUIRE(one.size() == 3);
  CHECK(one[0] == "X");
  CHECK(one[1] == "Y");
  CHECK(one[2] == "Z");

  const auto two = all_settings(2);
  REQUIRE(two.size() == 9);
  CHECK(two[0] == "XX");
  CHECK(two[1] == "XY");
  CHECK(two[3] == "YX");
  CHECK(two[8] == "ZZ");
  CHECK(std::is_sorted(two.begin(), two.end()));

  const auto five = all_settings(5);
  CHECK(five.size() == 243);
  CHECK(std::is_sorted(five.begin(), five.end()));
  CHECK(std::adjacent_find(five.begin(), five.end()) == five.end());
}

TEST_CASE("exact measurements reproduce Born probabilities") {
  Rng rng(41);
  for (int n : {1, 2, 3}) {
    const DensityMatrix rho = random_density(n, rng);
    const auto records = sample_measurements(rho, 0, 7);
    REQUIRE(records.size() == static_cast<size_t>(std::pow(3, n)));
    for (const auto& rec : records) {
      CHECK(rec.exact);
      CHECK(rec.shots == 0);
      REQUIRE(rec.counts.size() == static_cast<size_t>(1 << n));
      const oracle::OVec want =
          oracle::born_probabilities(oracle::OMat(rho.m), rec.setting);
      double total = 0.0;
      for (size_t i = 0; i < rec.counts.size(); ++i) {
        CHECK(std::abs(rec.counts[i] - want(static_cast<long>(i)).real()) < 1e-12);
        total += rec.counts[i];
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("sampled measurements: counts, determinism, convergence") {
  Rng rng(43);
  const DensityMatrix rho = random_density(2, rng);
  const auto a = sample_measurements(rho, 5000, 11);
  const auto b = sample_measurements(rho, 5000, 11);
  const auto c = sample_measurements(rho, 5000, 12);
  REQUIRE(a.size() == 9);
  bool any_diff = false;
  for (size_t s = 0; s < a.size(); ++s) {
    CHECK(a[s].setting == b[s].setting);
    CHECK_FALSE(a[s].exact);
    CHECK(a[s].shots == 5000);
    double total = 0.0;
    for (size_t i = 0; i < a[s].counts.size(); ++i) {
      CHECK(a[s].counts[i] == b[s].counts[i]);  // same seed, same draw
      CHECK(a[s].counts[i] >= 0.0);
      CHECK(a[s].counts[i] == std::floor(a[s].counts[i]));
      total += a[s].counts[i];
      if (a[s].counts[i] != c[s].counts[i]) any_diff = true;
    }
    CHECK(total == doctest::Approx(5000.0));
  }
  CHECK(any_diff);  // a different seed draws a different sample

  // Frequencies approach the Born distribution.
  const auto big = sample_measurements(rho, 400000, 5);
  for (const auto& rec : big) {
    const oracle::OVec want = oracle::born_probabilities(oracle::OMat(rho.m), rec.setting);
    for (size_t i = 0; i < rec.counts.size(); ++i)
      CHECK(std::abs(rec.counts[i] / 400000.0 - want(static_cast<long>(i)).real()) < 5e-3);
  }
}

TEST_CASE("linear inversion inverts exactly in the exact mode") {
  Rng rng(47);
  for (int n : {1, 2, 3}) {
    const DensityMatrix rho = random_density(n, rng);
    const Mat raw = qst_linear_inversion(sample_measurements(rho, 0, 1));
    CHECK((raw - rho.m).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(is_hermitian(raw));
    CHECK(std::abs(raw.trace().real() - 1.0) < 1e-10);
  }
}

TEST_CASE("sampled state tomography reconstructs with high fidelity") {
  Rng rng(53);
  const DensityMatrix rho = random_density(3, rng);
  const DensityMatrix rec =
      cp_project(qst_linear_inversion(sample_measurements(rho, 50000, 99)));
  CHECK(fidelity(rec, rho) > 0.98);

  // Five-qubit scale, protocol-sized: a pure reset state at modest shots.
  ProtocolConfig cfg;
  cfg.initial_target = TargetPrep::minus();
  cfg.free_evolution = FreeEvolution::rotation(RotationAxis::Z, 3 * kPi / 8);
  cfg.interaction = Interaction::deterministic(DetUSpec::XZ_iYX);
  const DensityMatrix rho5 = run_protocol(cfg).rho_final;
  const DensityMatrix rec5 =
      cp_project(qst_linear_inversion(sample_measurements(rho5, 10000, 3)));
  CHECK(fidelity(rec5, rho5) > 0.95);
}

TEST_CASE("cp_project: truncation with redistribution") {
  Mat bad = Mat::Zero(2, 2);
  bad(0, 0) = 1.2;
  bad(1, 1) = -0.2;
  const DensityMatrix fixed = cp_project(bad);
  CHECK(std::abs(fixed.m(0, 0).real() - 1.0) < 1e-12);
  CHECK(std::abs(fixed.m(1, 1).real()) < 1e-12);

  Rng rng(59);
  for (int k = 0; k < 20; ++k) {
    const DensityMatrix rho = random_density(2, rng);
    Mat raw = rho.m;
    for (int i = 0; i < 4; ++i)  // Hermitian perturbation with negative dips
      for (int j = 0; j <= i; ++j) {
        const cplx d(rng.normal() * 0.1, i == j ? 0.0 : rng.normal() * 0.1);
        raw(i, j) += d;
        if (i != j) raw(j, i) += std::conj(d);
      }
    raw /= raw.trace().real();
    const DensityMatrix proj = cp_project(raw);
    CHECK(std::abs(proj.m.trace().real() - 1.0) < 1e-12);
    CHECK(eig_hermitian_raw(proj.m).values.minCoeff() > -1e-12);
    // Idempotent, and a no-op on already-physical input.
    CHECK((cp_project(proj.m).m - proj.m).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((cp_project(rho.m).m - rho.m).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("standard process inputs") {
  const auto& in = standard_qpt_inputs();
  CHECK(std::abs(in[0].m(0, 0).real() - 1.0) < 1e-15);
  CHECK(std::abs(in[1].m(1, 1).real() - 1.0) < 1e-15);
  CHECK(std::abs(in[2].m(0, 1).real() - 0.5) < 1e-15);
  CHECK(std::abs(in[3].m(0, 1) - cplx(0.0, -0.5)) < 1e-15);
}

TEST_CASE("chi reconstruction: identity, X gate, depolarizing") {
  const auto& in = standard_qpt_inputs();
  const ChiMatrix ident = qpt_chi(in, in);
  CHECK(std::abs(ident.m(0, 0) - cplx(1.0, 0.0)) < 1e-10);
  CHECK(ident.m.cwiseAbs().sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(process_fidelity(ident) == doctest::Approx(1.0).epsilon(1e-10));

  std::array<DensityMatrix, 4> flipped;
  const Mat x = Mat(oracle::px());
  for (size_t k = 0; k < 4; ++k) flipped[k] = DensityMatrix(Mat(x * in[k].m * x.adjoint()));
  const ChiMatrix chi_x = qpt_chi(in, flipped);
  CHECK(std::abs(chi_x.m(1, 1) - cplx(1.0, 0.0)) < 1e-10);
  CHECK(process_fidelity(chi_x) == doctest::Approx(0.0).epsilon(1e-10));

  const double p = 0.3;
  const ChiMatrix chi_d = qpt_chi(in, depolarized_outputs(p));
  CHECK((chi_d.m - Mat(oracle::depolarizing_chi(p))).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(process_fidelity(chi_d) == doctest::Approx(1.0 - 0.75 * p).epsilon(1e-10));
  CHECK(is_hermitian(chi_d.m));
}

TEST_CASE("cptp projection enforces both constraints") {
  const ChiMatrix chi_d = qpt_chi(standard_qpt_inputs(), depolarized_outputs(0.2));
  // Already CPTP: projection is (numerically) the identity map.
  const ChiMatrix same = cptp_project(chi_d);
  CHECK(same.cptp_projected);
  CHECK((same.m - chi_d.m).cwiseAbs().maxCoeff() < 1e-8);

  Rng rng(61);
  for (int k = 0; k < 10; ++k) {
    ChiMatrix noisy = chi_d;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j <= i; ++j) {
        const cplx d(rng.normal() * 5e-3, i == j ? 0.0 : rng.normal() * 5e-3);
        noisy.m(i, j) += d;
        if (i != j) noisy.m(j, i) += std::conj(d);
      }
    const ChiMatrix fixed = cptp_project(noisy);
    CHECK(eig_hermitian_raw(fixed.m).values.minCoeff() > -1e-9);
    CHECK(tp_residual(fixed.m) < 1e-6);
    CHECK(std::abs(fixed.m.trace().real() - 1.0) < 1e-6);
    CHECK((fixed.m - chi_d.m).cwiseAbs().maxCoeff() < 0.1);  // stays near the input
  }
}

TEST_CASE("bootstrap: exact mode collapses to the noiseless pipeline") {
  // Noiseless deterministic reset acts as the identity channel on the target.
  std::array<DensityMatrix, 4> finals;
  const std::array<std::pair<double, double>, 4> angles{
      std::pair<double, double>{0.0, 0.0}, {kPi, 0.0}, {kPi / 2, 0.0}, {kPi / 2, kPi / 2}};
  ProtocolConfig cfg;
  cfg.free_evolution = FreeEvolution::rotation(RotationAxis::Z, 3 * kPi / 8);
  cfg.interaction = Interaction::deterministic(DetUSpec::XZ_iYX);
  for (size_t k = 0; k < 4; ++k) {
    cfg.initial_target = TargetPrep::pure(angles[k].first, angles[k].second);
    finals[k] = run_protocol(cfg).rho_final;
  }
  const Mat lifted =
      lift_to_device(success_projector(ProjectorMode::Reduced3), cfg.probe_order);

  BootstrapOptions opt;
  opt.n_sets = 5;
  opt.shots = 0;  // exact
  opt.seed = 21;
  const BootstrapReport exact = bootstrap_qpt(finals, lifted, kTargetSlot, opt);
  CHECK(exact.n_sets == 5);
  CHECK(exact.shots_per_setting == 0);
  REQUIRE(exact.fidelity_samples.size() == 5);
  CHECK(exact.mean_fidelity == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(exact.error_bar == doctest::Approx(0.0).epsilon(1e-12));

  // Sampled: spread appears, the error bar is 1.96 × the sample stddev, and
  // the run is seed-deterministic.
  opt.n_sets = 12;
  opt.shots = 2000;
  const BootstrapReport boot = bootstrap_qpt(finals, lifted, kTargetSlot, opt);
  REQUIRE(boot.fidelity_samples.size() == 12);
  CHECK(boot.shots_per_setting == 2000);
  double mean = 0.0;
  for (double f : boot.fidelity_samples) {
    CHECK(f > 0.5);
    CHECK(f < 1.0 + 1e-9);
    mean += f;
  }
  mean /= 12.0;
  CHECK(boot.mean_fidelity == doctest::Approx(mean).epsilon(1e-12));
  double var = 0.0;
  for (double f : boot.fidelity_samples) var += (f - mean) * (f - mean);
  var /= 11.0;
  CHECK(boot.error_bar == doctest::Approx(1.96 * std::sqrt(var)).epsilon(1e-9));
  CHECK(boot.error_bar > 0.0);

  const BootstrapReport again = bootstrap_qpt(finals, lifted, kTargetSlot, opt);
  CHECK(again.mean_fidelity == boot.mean_fidelity);
  CHECK(again.error_bar == boot.error_bar);
}

TEST_CASE("record CSV round trip") {
  Rng rng(67);
  const DensityMatrix rho = random_density(2, rng);
  for (long long shots : {static_cast<long long>(0), static_cast<long long>(300)}) {
    const auto records = sample_measurements(rho, shots, 31);
    std::stringstream ss;
    write_records_csv(ss, records);
    std::string header;
    std::getline(ss, header);
    CHECK(header == "setting,bitstring,count");
    ss.clear();
    ss.seekg(0);
    const auto back = read_records_csv(ss);
    REQUIRE(back.size() == records.size());
    for (size_t s = 0; s < records.size(); ++s) {
      CHECK(back[s].setting == records[s].setting);
      CHECK(back[s].exact == records[s].exact);
      CHECK(back[s].shots == records[s].shots);
      REQUIRE(back[s].counts.size() == records[s].counts.size());
      for (size_t i = 0; i < records[s].counts.size(); ++i)
        CHECK(std::abs(back[s].counts[i] - records[s].counts[i]) < 1e-9);
    }
  }
}
