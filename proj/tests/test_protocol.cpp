// W4 protocol: success subspace, circuit assembly, reset runs, and the
// resetting-theorem property, checked against the canonical dense oracle.
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "qreset/protocol.hpp"

using namespace qreset;

namespace {

constexpr double kPi = 3.14159265358979323846;

Mat2 random_rotation(Rng& rng) {
  const Mat rz1 = gate_matrix(make_1q(GateKind::RZ, 0, rng.uniform(0.0, 2 * kPi)));
  const Mat ry = gate_matrix(make_1q(GateKind::RY, 0, rng.uniform(0.0, kPi)));
  const Mat rz2 = gate_matrix(make_1q(GateKind::RZ, 0, rng.uniform(0.0, 2 * kPi)));
  return Mat2(rz2 * ry * rz1);
}

}  // namespace

TEST_CASE("target preparation gates") {
  const TargetPrep minus = TargetPrep::minus();
  Vec got = Vec::Zero(2);
  got(0) = 1.0;
  got = minus.g1() * got;
  const Vec want = bloch_state(kPi / 2, kPi).amps;
  CHECK(std::norm(want.dot(got)) == doctest::Approx(1.0).epsilon(1e-12));

  const TargetPrep one = TargetPrep::one();
  got = Vec::Zero(2);
  got(0) = 1.0;
  got = one.g1() * got;
  CHECK(std::abs(got(1)) == doctest::Approx(1.0).epsilon(1e-12));

  // Mixed prep: ideal state is the pure state idled through the combined channel.
  const TargetPrep mixed = TargetPrep::mixed_from(kPi / 2, kPi, 1.0);
  const DensityMatrix rho0 = mixed.ideal_state();
  CHECK(purity(rho0) < 1.0 - 1e-3);
  CHECK(std::abs(rho0.m.trace().real() - 1.0) < 1e-12);
  const double g = 1.0 / 30.0, gp = 1.0 / 5.0;
  CHECK(trace_distance(rho0, DensityMatrix::pure(bloch_state(kPi / 2, kPi))) ==
        doctest::Approx(oracle::idle_minus_distance(g, gp)).epsilon(1e-10));
}

TEST_CASE("success subspace: basis, projector, hand values") {
  const SuccessSubspace full = success_projector(ProjectorMode::Full6);
  const SuccessSubspace red = success_projector(ProjectorMode::Reduced3);
  CHECK(full.rank() == 6);
  CHECK(red.rank() == 3);
  CHECK_THROWS_AS(success_projector(ProjectorMode::Auto), std::invalid_argument);

  for (const SuccessSubspace* s : {&full, &red}) {
    const int r = s->rank();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        const cplx ip = s->basis[static_cast<size_t>(i)].dot(s->basis[static_cast<size_t>(j)]);
        CHECK(std::abs(ip - (i == j ? 1.0 : 0.0)) < 1e-12);
      }
    CHECK((s->projector * s->projector - s->projector).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(is_hermitian(s->projector));
    CHECK(std::abs(s->projector.trace().real() - r) < 1e-12);
  }

  CHECK(full.projector(0, 0).real() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(full.projector(1, 1).real() == doctest::Approx(0.25).epsilon(1e-12));  // ⟨0001|P|0001⟩
  CHECK(red.projector(1, 1).real() == doctest::Approx(0.0).epsilon(1e-12));

  // Device lift: rank doubles (identity on target), still a projector.
  const Mat lifted = lift_to_device(full, {0, 1, 4, 3});
  CHECK(lifted.rows() == 32);
  CHECK((lifted * lifted - lifted).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(lifted.trace().real() - 12.0) < 1e-12);
  // Independent construction agrees entrywise.
  CHECK((lifted - Mat(oracle::lifted_projector({0, 1, 4, 3}, true))).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK((lift_to_device(red, {4, 3, 0, 1}) -
         Mat(oracle::lifted_projector({4, 3, 0, 1}, false)))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("config validation and projector mode resolution") {
  ProtocolConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.resolved_projector_mode() == ProjectorMode::Reduced3);  // deterministic default

  ProtocolConfig rnd = cfg;
  rnd.interaction = Interaction::random_u(RandomUnitarySpec::from_seed(1));
  CHECK(rnd.resolved_projector_mode() == ProjectorMode::Full6);

  ProtocolConfig bad = cfg;
  bad.probe_order = {0, 1, 2, 3};  // slot 2 is the target
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.probe_order = {0, 1, 3, 3};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("protocol circuit structure") {
  ProtocolConfig case1a;
  case1a.initial_target = TargetPrep::minus();
  case1a.free_evolution = FreeEvolution::rotation(RotationAxis::Z, 3 * kPi / 8);
  case1a.interaction = Interaction::deterministic(DetUSpec::XZ_iYX);
  Circuit c = build_protocol_circuit(case1a);
  CHECK(c.scheduled);
  const DepthReport d = c.depth();
  CHECK(d.depth_double == 12);
  CHECK(d.count_double == 12);

  // Random-interaction circuit keeps the same entangling budget.
  ProtocolConfig case3;
  case3.initial_target = TargetPrep::one();
  case3.free_evolution = FreeEvolution::rotation(RotationAxis::Z, 0.0);
  case3.interaction = Interaction::random_u(RandomUnitarySpec::from_seed(99));
  const DepthReport d3 = build_protocol_circuit(case3).depth();
  CHECK(d3.depth_double == 12);
  CHECK(d3.count_double == 12);

  // Identity interaction with no free evolution leaves the prep state alone.
  ProtocolConfig idle;
  idle.initial_target = TargetPrep::one();
  idle.free_evolution = FreeEvolution::rotation(RotationAxis::Z, 0.0);
  idle.interaction = Interaction::custom_u(Mat4::Identity());
  const StateVector full =
      apply_noiseless(build_protocol_circuit(idle), StateVector::basis(5, 0));
  const StateVector prep =
      apply_noiseless(build_prep_circuit(idle), StateVector::basis(5, 0));
  CHECK(std::abs(std::abs(full.amps.dot(prep.amps)) - 1.0) < 1e-10);

  // Prep state matches the oracle's direct construction (singlet ⊗ |1⟩ ⊗ singlet).
  oracle::OVec want = oracle::OVec::Zero(32);
  const double s = 1.0 / std::sqrt(2.0);
  for (const auto& [b01, a01] : {std::pair<int, double>{0b01, s}, {0b10, -s}})
    for (const auto& [b34, a34] : {std::pair<int, double>{0b01, s}, {0b10, -s}})
      want(((b01 >> 1) << 4) | ((b01 & 1) << 3) | (1 << 2) | ((b34 >> 1) << 1) | (b34 & 1)) =
          a01 * a34;
  cplx phase = 0.0;
  for (int i = 0; i < 32; ++i)
    if (std::abs(want(i)) > 0.4) {  // nonzero entries all have magnitude 1/2
      phase = prep.amps(i) / want(i);
      break;
    }
  CHECK(std::abs(std::abs(phase) - 1.0) < 1e-10);
  CHECK((prep.amps - Vec(want) * phase).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("deterministic reset: cases 1a and 1b, 16-point grid") {
  for (int k = 1; k <= 16; ++k) {
    const double phi = k * kPi / 16;
    ProtocolConfig a;
    a.initial_target = TargetPrep::minus();
    a.free_evolution = FreeEvolution::rotation(RotationAxis::Z, phi);
    a.interaction = Interaction::deterministic(DetUSpec::XZ_iYX);
    const RunResult ra = run_protocol(a);
    CHECK(std::abs(ra.p_success - 1.0) < 1e-9);
    CHECK(ra.trace_distance_to_initial < 1e-9);
    CHECK(ra.fidelity_to_initial > 1.0 - 1e-9);
    CHECK(std::abs(ra.p_success_literal - ra.p_success) < 1e-9);

    ProtocolConfig b;
    b.initial_target = TargetPrep::one();
    b.free_evolution = FreeEvolution::rotation(RotationAxis::X, phi);
    b.interaction = Interaction::deterministic(DetUSpec::mZZ_iYX);
    const RunResult rb = run_protocol(b);
    CHECK(std::abs(rb.p_success - 1.0) < 1e-9);
    CHECK(rb.trace_distance_to_initial < 1e-9);
  }
}

TEST_CASE("mixed-state reset (case 1c, noiseless)") {
  ProtocolConfig cfg;
  cfg.initial_target = TargetPrep::mixed_from(kPi / 2, kPi, 1.0);
  cfg.free_evolution = FreeEvolution::rotation(RotationAxis::X, 5 * kPi / 16);
  cfg.interaction = Interaction::deterministic(DetUSpec::mZZ_iYX);
  const RunResult r = run_protocol(cfg);
  CHECK(std::abs(r.p_success - 1.0) < 1e-8);
  CHECK(r.trace_distance_to_initial < 1e-8);
  CHECK(purity(r.rho_reset) < 1.0 - 1e-3);  // still mixed after reset
  CHECK(r.initial_trace_distance == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("random interactions match the canonical dense oracle per run") {
  Rng rng(113);
  int successes = 0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    const RandomUnitarySpec spec = RandomUnitarySpec::from_seed(derive_seed(5, "oracle", k));
    ProtocolConfig cfg;
    cfg.initial_target = TargetPrep::one();
    cfg.free_evolution = FreeEvolution::rotation(RotationAxis::Z, 0.0);
    cfg.interaction = Interaction::random_u(spec);
    cfg.projector_mode = ProjectorMode::Full6;

    const oracle::W4Result want =
        oracle::run_w4(kPi, 0.0, oracle::id2(), oracle::random_u(spec.angles), {0, 1, 4, 3},
                       true);
    try {
      const RunResult got = run_protocol(cfg);
      CHECK(std::abs(got.p_success - want.p) < 1e-10);
      CHECK((got.rho_reset.m - Mat(want.rho_reset)).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(std::abs(got.trace_distance_to_initial - want.dist) < 1e-8);
      ++successes;
    } catch (const ResetNeverSucceeds&) {
      CHECK(want.p < 1e-12);
    }
  }
  CHECK(successes > 25);  // the ensemble succeeds far more often than not

  // With a nontrivial rotation and a random Bloch target as well.
  for (std::uint64_t k = 0; k < 25; ++k) {
    const double theta = std::acos(1.0 - 2.0 * rng.uniform());
    const double phi = rng.uniform(0.0, 2 * kPi);
    const Mat2 r = random_rotation(rng);
    const RandomUnitarySpec spec = RandomUnitarySpec::from_seed(derive_seed(6, "oracle2", k));

    ProtocolConfig cfg;
    cfg.initial_target = TargetPrep::pure(theta, phi);
    cfg.free_evolution = FreeEvolution::unitary(r);
    cfg.interaction = Interaction::random_u(spec);
    cfg.projector_mode = ProjectorMode::Full6;

    const oracle::W4Result want =
        oracle::run_w4(theta, phi, oracle::OMat(Mat(r)), oracle::random_u(spec.angles),
                       {0, 1, 4, 3}, true);
    try {
      const RunResult got = run_protocol(cfg);
      CHECK(std::abs(got.p_success - want.p) < 1e-10);
      CHECK((got.rho_reset.m - Mat(want.rho_reset)).cwiseAbs().maxCoeff() < 1e-9);
    } catch (const ResetNeverSucceeds&) {
      CHECK(want.p < 1e-12);
    }
  }
}

TEST_CASE("resetting theorem: 200 random (R, U) pairs") {
  for (std::uint64_t k = 0; k < 200; ++k) {
    Rng rng(derive_seed(17, "theorem", k));
    ProtocolConfig cfg;
    cfg.initial_target =
        TargetPrep::pure(std::acos(1.0 - 2.0 * rng.uniform()), rng.uniform(0.0, 2 * kPi));
    cfg.free_evolution = FreeEvolution::unitary(random_rotation(rng));
    cfg.interaction =
        Interaction::random_u(RandomUnitarySpec::from_seed(derive_seed(17, "theorem-u", k)));
    cfg.projector_mode = ProjectorMode::Full6;
    try {
      const RunResult r = run_protocol(cfg);
      if (r.p_success >= 1e-6) CHECK(r.trace_distance_to_initial < 1e-8);
      CHECK(r.p_success <= 1.0 + 1e-12);
      const DensityMatrix& reset = r.rho_reset;
      CHECK(is_hermitian(reset.m));
      CHECK(std::abs(reset.m.trace().real() - 1.0) < 1e-10);
    } catch (const ResetNeverSucceeds& e) {
      CHECK(e.p_success == 0.0);
    }
  }
}

TEST_CASE("subspace nesting: full6 success never below reduced3") {
  for (std::uint64_t k = 0; k < 40; ++k) {
    Rng rng(derive_seed(23, "nesting", k));
    ProtocolConfig cfg;
    cfg.initial_target = TargetPrep::pure(rng.uniform(0.0, kPi), rng.uniform(0.0, 2 * kPi));
    cfg.free_evolution = FreeEvolution::unitary(random_rotation(rng));
    cfg.interaction =
        Interaction::random_u(RandomUnitarySpec::from_seed(derive_seed(23, "nesting-u", k)));
    double p_full = 0.0, p_red = 0.0;
    cfg.projector_mode = ProjectorMode::Full6;
    try {
      p_full = run_protocol(cfg).p_success;
    } catch (const ResetNeverSucceeds&) {
    }
    cfg.projector_mode = ProjectorMode::Reduced3;
    try {
      p_red = run_protocol(cfg).p_success;
    } catch (const ResetNeverSucceeds&) {
    }
    CHECK(p_full >= p_red - 1e-12);
  }
}

TEST_CASE("reset never succeeds: identity interaction") {
  ProtocolConfig cfg;
  cfg.initial_target = TargetPrep::one();
  cfg.free_evolution = FreeEvolution::rotation(RotationAxis::Z, 0.0);
  cfg.interaction = Interaction::custom_u(Mat4::Identity());
  cfg.projector_mode = ProjectorMode::Full6;
  bool thrown = false;
  try {
    run_protocol(cfg);
  } catch (const ResetNeverSucceeds& e) {
    thrown = true;
    CHECK(e.p_success == 0.0);
    CHECK(std::string(e.what()).find("reset never succeeds") != std::string::npos);
  }
  CHECK(thrown);
}

TEST_CASE("no-reset baseline trajectories") {
  ProtocolConfig cfg;
  cfg.initial_target = TargetPrep::minus();
  cfg.free_evolution = FreeEvolution::rotation(RotationAxis::Z, 3 * kPi / 8);
  const auto traj = run_no_reset_baseline(cfg, 3 * kPi / 2);
  REQUIRE(traj.size() == 4);
  const Mat r = cfg.free_evolution.matrix();
  Mat rho = DensityMatrix::pure(bloch_state(kPi / 2, kPi)).m;
  for (const DensityMatrix& step : traj) {
    rho = r * rho * r.adjoint();
    CHECK((step.m - rho).cwiseAbs().maxCoeff() < 1e-12);
  }

  // φ=0 keeps the state fixed.
  ProtocolConfig still = cfg;
  still.free_evolution = FreeEvolution::rotation(RotationAxis::Z, 0.0);
  for (const DensityMatrix& step : run_no_reset_baseline(still, 0.0))
    CHECK(trace_distance(step, DensityMatrix::pure(bloch_state(kPi / 2, kPi))) < 1e-12);

  // |−⟩ under R_z(π) lands on |+⟩.
  ProtocolConfig flip = cfg;
  flip.free_evolution = FreeEvolution::rotation(RotationAxis::Z, kPi);
  const auto one_step = run_no_reset_baseline(flip, kPi);
  REQUIRE(one_step.size() == 1);
  CHECK(trace_distance(one_step[0], DensityMatrix::pure(bloch_state(kPi / 2, 0.0))) < 1e-12);

  ProtocolConfig matrix_r = cfg;
  matrix_r.free_evolution = FreeEvolution::unitary(Mat2::Identity());
  CHECK_THROWS_AS(run_no_reset_baseline(matrix_r, kPi), std::invalid_argument);
}

TEST_CASE("probe order discovery") {
  const auto orders = discover_probe_orders(50, 12345);
  REQUIRE(orders.size() == 2);
  const std::array<int, 4> a{0, 1, 4, 3}, b{4, 3, 0, 1};
  CHECK(std::find(orders.begin(), orders.end(), a) != orders.end());
  CHECK(std::find(orders.begin(), orders.end(), b) != orders.end());
  CHECK(discover_probe_order() == a);

  // Negative control: splitting singlet partners across pairs is not present.
  const std::array<int, 4> wrong{0, 3, 4, 1};
  CHECK(std::find(orders.begin(), orders.end(), wrong) == orders.end());
}

TEST_CASE("noisy runs: sanity of metrics against the noiseless limit") {
  ProtocolConfig cfg;
  cfg.initial_target = TargetPrep::minus();
  cfg.free_evolution = FreeEvolution::rotation(RotationAxis::Z, 3 * kPi / 8);
  cfg.interaction = Interaction::deterministic(DetUSpec::XZ_iYX);

  NoiseModel nearly_clean;
  nearly_clean.default_t1_us = 1e18;
  nearly_clean.default_tphi_us = 1e18;
  cfg.noise = nearly_clean;
  const RunResult clean = run_protocol(cfg);
  CHECK(std::abs(clean.p_success - 1.0) < 1e-9);
  CHECK(clean.trace_distance_to_initial < 1e-9);
  CHECK(clean.initial_trace_distance < 1e-12);

  cfg.noise = NoiseModel{};  // default decoherence
  const RunResult noisy = run_protocol(cfg);
  CHECK(noisy.p_success < 1.0 - 1e-3);
  CHECK(noisy.p_success > 0.1);
  CHECK(noisy.trace_distance_to_initial > 1e-3);
  CHECK(noisy.initial_trace_distance > 1e-4);  // prep layers already decohere
  CHECK(std::abs(noisy.rho_final.m.trace().real() - 1.0) < 1e-10);
  CHECK(noisy.p_success_literal <= noisy.p_success + 1e-12);
}
