#include "qreset/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace qreset {

namespace {

using nlohmann::json;

std::string fmt_g12(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

// Run f(0..n-1) across a worker pool; deterministic by index, first exception
// rethrown after the pool drains.
template <typename F>
void parallel_for(int n, int workers, F&& f) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, n));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ── JSON helpers ─────────────────────────────────────────────────────────────

json complex_to_json(const cplx& z) { return json::array({z.real(), z.imag()}); }

cplx complex_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError("config: " + field + " entries must be [re, im] pairs");
  return {j[0].get<double>(), j[1].get<double>()};
}

json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat matrix_from_json(const json& j, int dim, const std::string& field) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw ConfigError("config: " + field + " must be a " + std::to_string(dim) + "x" +
                      std::to_string(dim) + " matrix");
  Mat m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      throw ConfigError("config: " + field + " rows must have " + std::to_string(dim) +
                        " entries");
    for (int c = 0; c < dim; ++c) m(r, c) = complex_from_json(row[static_cast<size_t>(c)], field);
  }
  return m;
}

json target_prep_to_json(const TargetPrep& tp) {
  json j{{"theta", tp.theta}, {"phi", tp.phi}, {"mixed", tp.mixed}};
  if (tp.mixed) {
    j["idle_us"] = tp.idle_us;
    j["idle_t1_us"] = tp.idle_t1_us;
    j["idle_tphi_us"] = tp.idle_tphi_us;
  }
  return j;
}

TargetPrep target_prep_from_json(const json& j) {
  TargetPrep tp;
  tp.theta = j.value("theta", 0.0);
  tp.phi = j.value("phi", 0.0);
  tp.mixed = j.value("mixed", false);
  tp.idle_us = j.value("idle_us", 0.0);
  tp.idle_t1_us = j.value("idle_t1_us", 30.0);
  tp.idle_tphi_us = j.value("idle_tphi_us", 5.0);
  return tp;
}

json free_evolution_to_json(const FreeEvolution& fe) {
  if (!fe.is_rotation) return json{{"matrix", matrix_to_json(fe.u)}};
  const char* axis = fe.axis == RotationAxis::X ? "x" : (fe.axis == RotationAxis::Y ? "y" : "z");
  return json{{"axis", axis}, {"angle", fe.angle}};
}

FreeEvolution free_evolution_from_json(const json& j) {
  if (j.contains("matrix"))
    return FreeEvolution::unitary(Mat2(matrix_from_json(j["matrix"], 2, "free_evolution.matrix")));
  const std::string axis = j.value("axis", "z");
  RotationAxis a;
  if (axis == "x")
    a = RotationAxis::X;
  else if (axis == "y")
    a = RotationAxis::Y;
  else if (axis == "z")
    a = RotationAxis::Z;
  else
    throw ConfigError("config: free_evolution.axis must be x, y, or z");
  return FreeEvolution::rotation(a, j.value("angle", 0.0));
}

json interaction_to_json(const Interaction& in) {
  switch (in.kind) {
    case Interaction::Kind::Deterministic:
      return json{{"kind", in.det == DetUSpec::XZ_iYX ? "det1" : "det2"}};
    case Interaction::Kind::Random: {
      json angles = json::array();
      for (double a : in.random.angles) angles.push_back(a);
      return json{{"kind", "random"}, {"seed", in.random.seed}, {"angles", angles}};
    }
    case Interaction::Kind::Custom:
      return json{{"kind", "custom"}, {"matrix", matrix_to_json(in.custom)}};
  }
  throw ConfigError("config: unknown interaction kind");
}

Interaction interaction_from_json(const json& j) {
  const std::string kind = j.value("kind", "det1");
  if (kind == "det1") return Interaction::deterministic(DetUSpec::XZ_iYX);
  if (kind == "det2") return Interaction::deterministic(DetUSpec::mZZ_iYX);
  if (kind == "random") {
    RandomUnitarySpec spec;
    spec.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("angles")) {
      const json& angles = j["angles"];
      if (!angles.is_array() || angles.size() != 12)
        throw ConfigError("config: interaction.angles must hold 12 numbers");
      for (size_t i = 0; i < 12; ++i) spec.angles[i] = angles[i].get<double>();
    } else {
      spec = RandomUnitarySpec::from_seed(spec.seed);
    }
    return Interaction::random_u(spec);
  }
  if (kind == "custom")
    return Interaction::custom_u(Mat4(matrix_from_json(j.at("matrix"), 4, "interaction.matrix")));
  throw ConfigError("config: interaction.kind must be det1, det2, random, or custom");
}

json noise_to_json(const NoiseModel& nm) {
  json j{{"t1_us", nm.default_t1_us},
         {"tphi_us", nm.default_tphi_us},
         {"single_ns", nm.single_ns},
         {"double_ns", nm.double_ns},
         {"idle_decoherence", nm.idle_decoherence},
         {"exponential_weights", nm.exponential_weights}};
  if (!nm.t1_us.empty()) j["t1_per_qubit"] = nm.t1_us;
  if (!nm.tphi_us.empty()) j["tphi_per_qubit"] = nm.tphi_us;
  return j;
}

NoiseModel noise_from_json(const json& j) {
  NoiseModel nm;
  nm.default_t1_us = j.value("t1_us", 30.0);
  nm.default_tphi_us = j.value("tphi_us", 5.0);
  nm.single_ns = j.value("single_ns", 30.0);
  nm.double_ns = j.value("double_ns", 45.0);
  nm.idle_decoherence = j.value("idle_decoherence", true);
  nm.exponential_weights = j.value("exponential_weights", false);
  if (j.contains("t1_per_qubit")) nm.t1_us = j["t1_per_qubit"].get<std::vector<double>>();
  if (j.contains("tphi_per_qubit")) nm.tphi_us = j["tphi_per_qubit"].get<std::vector<double>>();
  return nm;
}

json protocol_to_json(const ProtocolConfig& pc) {
  json j;
  j["initial_target"] = target_prep_to_json(pc.initial_target);
  j["free_evolution"] = free_evolution_to_json(pc.free_evolution);
  j["interaction"] = interaction_to_json(pc.interaction);
  j["probe_order"] = pc.probe_order;
  j["projector_mode"] = pc.projector_mode == ProjectorMode::Auto
                            ? "auto"
                            : (pc.projector_mode == ProjectorMode::Full6 ? "full6" : "reduced3");
  j["noise"] = pc.noise ? noise_to_json(*pc.noise) : json(nullptr);
  j["seed"] = pc.seed;
  return j;
}

ProtocolConfig protocol_from_json(const json& j) {
  ProtocolConfig pc;
  if (j.contains("initial_target")) pc.initial_target = target_prep_from_json(j["initial_target"]);
  if (j.contains("free_evolution")) pc.free_evolution = free_evolution_from_json(j["free_evolution"]);
  if (j.contains("interaction")) pc.interaction = interaction_from_json(j["interaction"]);
  if (j.contains("probe_order")) {
    const json& po = j["probe_order"];
    if (!po.is_array() || po.size() != 4)
      throw ConfigError("config: protocol.probe_order must list the 4 probe slots");
    for (size_t i = 0; i < 4; ++i) pc.probe_order[i] = po[i].get<int>();
  }
  const std::string mode = j.value("projector_mode", "auto");
  if (mode == "auto")
    pc.projector_mode = ProjectorMode::Auto;
  else if (mode == "full6")
    pc.projector_mode = ProjectorMode::Full6;
  else if (mode == "reduced3")
    pc.projector_mode = ProjectorMode::Reduced3;
  else
    throw ConfigError("config: protocol.projector_mode must be auto, full6, or reduced3");
  if (j.contains("noise") && !j["noise"].is_null()) pc.noise = noise_from_json(j["noise"]);
  pc.seed = j.value("seed", std::uint64_t{0});
  return pc;
}

// ── Rows ─────────────────────────────────────────────────────────────────────

ResultRow row_from_result(const ExperimentConfig& cfg, int index, double phi_over_pi,
                          std::uint64_t seed, const RunResult& rr) {
  ResultRow row;
  row.case_id = case_name(cfg.case_id);
  row.index = index;
  row.phi_over_pi = phi_over_pi;
  row.p_success = rr.p_success;
  row.trace_distance = rr.trace_distance_to_initial;
  row.fidelity = rr.fidelity_to_initial;
  row.depth_single = rr.depth_report.depth_single;
  row.depth_double = rr.depth_report.depth_double;
  row.seed = seed;
  return row;
}

// The reset never succeeded: success probability 0, no post-selected state.
// The -1 sentinels keep the row numeric; aggregates skip them.
ResultRow row_without_reset(const ExperimentConfig& cfg, int index, double phi_over_pi,
                            std::uint64_t seed, const DepthReport& depth) {
  ResultRow row;
  row.case_id = case_name(cfg.case_id);
  row.index = index;
  row.phi_over_pi = phi_over_pi;
  row.p_success = 0.0;
  row.trace_distance = -1.0;
  row.fidelity = -1.0;
  row.depth_single = depth.depth_single;
  row.depth_double = depth.depth_double;
  row.seed = seed;
  return row;
}

int expected_rows(const ExperimentConfig& cfg) {
  if (!cfg.sweep_phi_over_pi.empty()) return static_cast<int>(cfg.sweep_phi_over_pi.size());
  if (cfg.n_random > 0) return cfg.n_random;
  return cfg.case_id == CaseId::Case2Qpt ? 4 : 1;
}

void aggregate(const std::vector<ResultRow>& rows, double& mean_p, double& mean_d,
               double& mean_f, int& n_success) {
  mean_p = mean_d = mean_f = 0.0;
  n_success = 0;
  for (const ResultRow& r : rows) {
    mean_p += r.p_success;
    if (r.trace_distance >= 0.0) {
      mean_d += r.trace_distance;
      mean_f += r.fidelity;
      ++n_success;
    }
  }
  if (!rows.empty()) mean_p /= static_cast<double>(rows.size());
  if (n_success > 0) {
    mean_d /= n_success;
    mean_f /= n_success;
  }
}

std::filesystem::path plotdata_dir(const ExperimentConfig& cfg) {
  return std::filesystem::path(cfg.resolved_outdir()) / "plotdata";
}

}  // namespace

// ── Case ids ─────────────────────────────────────────────────────────────────

const char* case_name(CaseId id) {
  switch (id) {
    case CaseId::Case1a: return "case1a";
    case CaseId::Case1b: return "case1b";
    case CaseId::Case1c: return "case1c";
    case CaseId::Case2Qpt: return "case2_qpt";
    case CaseId::Case3Random: return "case3_random";
    case CaseId::Custom: return "custom";
  }
  return "?";
}

CaseId case_from_name(const std::string& name) {
  if (name == "case1a") return CaseId::Case1a;
  if (name == "case1b") return CaseId::Case1b;
  if (name == "case1c") return CaseId::Case1c;
  if (name == "case2_qpt") return CaseId::Case2Qpt;
  if (name == "case3_random") return CaseId::Case3Random;
  if (name == "custom") return CaseId::Custom;
  throw ConfigError("config: unknown case_id \"" + name + "\"");
}

// ── ExperimentConfig ─────────────────────────────────────────────────────────

void ExperimentConfig::validate() const {
  const int modes = (!sweep_phi_over_pi.empty() ? 1 : 0) + (n_random > 0 ? 1 : 0) +
                    (single_run ? 1 : 0);
  if (modes != 1)
    throw ConfigError(
        "config: exactly one of sweep_phi_over_pi / n_random / single_run must be set");
  if (n_random < 0) throw ConfigError("config: n_random must be non-negative");
  if (!sweep_phi_over_pi.empty() && !protocol.free_evolution.is_rotation)
    throw ConfigError("config: sweeps require an axis-angle free evolution");
  if (case_id == CaseId::Case2Qpt && !single_run)
    throw ConfigError("config: case2_qpt runs as single_run with tomography options");
  if (workers < 0) throw ConfigError("config: workers must be non-negative");
  try {
    protocol.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: protocol: ") + e.what());
  }
}

std::string ExperimentConfig::resolved_outdir() const {
  if (!outdir.empty()) return outdir;
  if (const char* env = std::getenv(kOutdirEnvVar); env && *env) return env;
  return "results";
}

ExperimentConfig preset_case(CaseId id) {
  ExperimentConfig cfg;
  cfg.case_id = id;
  switch (id) {
    case CaseId::Case1a:
      cfg.protocol.initial_target = TargetPrep::minus();
      cfg.protocol.free_evolution = FreeEvolution::rotation(RotationAxis::Z, 0.0);
      cfg.protocol.interaction = Interaction::deterministic(DetUSpec::XZ_iYX);
      for (int k = 1; k <= 8; ++k) cfg.sweep_phi_over_pi.push_back(k / 16.0);
      break;
    case CaseId::Case1b:
      cfg.protocol.initial_target = TargetPrep::one();
      cfg.protocol.free_evolution = FreeEvolution::rotation(RotationAxis::X, 0.0);
      cfg.protocol.interaction = Interaction::deterministic(DetUSpec::mZZ_iYX);
      for (int k = 1; k <= 8; ++k) cfg.sweep_phi_over_pi.push_back(k / 16.0);
      break;
    case CaseId::Case1c:
      cfg.protocol.initial_target = TargetPrep::mixed_from(M_PI / 2, M_PI, 1.0);
      cfg.protocol.free_evolution = FreeEvolution::rotation(RotationAxis::X, 5 * M_PI / 16);
      cfg.protocol.interaction = Interaction::deterministic(DetUSpec::mZZ_iYX);
      cfg.single_run = true;
      break;
    case CaseId::Case2Qpt:
      cfg.protocol.free_evolution = FreeEvolution::rotation(RotationAxis::Z, 3 * M_PI / 8);
      cfg.protocol.interaction = Interaction::deterministic(DetUSpec::XZ_iYX);
      cfg.single_run = true;
      cfg.tomography = TomographyOptions{};
      break;
    case CaseId::Case3Random:
      cfg.protocol.initial_target = TargetPrep::one();
      cfg.protocol.free_evolution = FreeEvolution::rotation(RotationAxis::Z, 0.0);
      cfg.protocol.interaction = Interaction::random_u(RandomUnitarySpec{});
      cfg.protocol.projector_mode = ProjectorMode::Full6;
      cfg.n_random = 100;
      break;
    case CaseId::Custom:
      cfg.single_run = true;
      break;
  }
  return cfg;
}

// ── Config JSON ──────────────────────────────────────────────────────────────

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    if (j.contains("case_id")) cfg.case_id = case_from_name(j["case_id"].get<std::string>());
    if (j.contains("protocol")) cfg.protocol = protocol_from_json(j["protocol"]);
    if (j.contains("sweep_phi_over_pi"))
      cfg.sweep_phi_over_pi = j["sweep_phi_over_pi"].get<std::vector<double>>();
    cfg.n_random = j.value("n_random", 0);
    cfg.single_run = j.value("single_run", false);
    if (j.contains("tomography") && !j["tomography"].is_null()) {
      TomographyOptions topt;
      topt.shots = j["tomography"].value("shots", 10000LL);
      topt.n_bootstrap = j["tomography"].value("n_bootstrap", 200);
      cfg.tomography = topt;
    }
    cfg.outdir = j.value("outdir", std::string{});
    cfg.master_seed = j.value("master_seed", std::uint64_t{7700});
    cfg.workers = j.value("workers", 0);
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
  json j;
  j["case_id"] = case_name(cfg.case_id);
  j["protocol"] = protocol_to_json(cfg.protocol);
  if (!cfg.sweep_phi_over_pi.empty()) j["sweep_phi_over_pi"] = cfg.sweep_phi_over_pi;
  if (cfg.n_random > 0) j["n_random"] = cfg.n_random;
  j["single_run"] = cfg.single_run;
  if (cfg.tomography)
    j["tomography"] = json{{"shots", cfg.tomography->shots},
                           {"n_bootstrap", cfg.tomography->n_bootstrap}};
  j["outdir"] = cfg.outdir;
  j["master_seed"] = cfg.master_seed;
  j["workers"] = cfg.workers;
  return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json_text(buf.str());
}

// ── Result CSV ───────────────────────────────────────────────────────────────

const char* const kResultsCsvHeader =
    "case_id,index,phi_over_pi,p_success,trace_distance,fidelity,depth_single,depth_double,"
    "seed";

std::string format_row(const ResultRow& row) {
  std::ostringstream out;
  out << row.case_id << ',' << row.index << ',' << fmt_g12(row.phi_over_pi) << ','
      << fmt_g12(row.p_success) << ',' << fmt_g12(row.trace_distance) << ','
      << fmt_g12(row.fidelity) << ',' << row.depth_single << ',' << row.depth_double << ','
      << row.seed;
  return out.str();
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("config: cannot write " + path);
  out << kResultsCsvHeader << '\n';
  for (const ResultRow& r : rows) out << format_row(r) << '\n';
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::vector<ResultRow> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line == kResultsCsvHeader) continue;
    }
    std::istringstream ls(line);
    ResultRow r;
    std::string field;
    auto next = [&ls, &field, &line]() -> std::string& {
      if (!std::getline(ls, field, ',' ))
        throw ConfigError("results: malformed row: " + line);
      return field;
    };
    try {
      r.case_id = next();
      r.index = std::stoi(next());
      r.phi_over_pi = std::stod(next());
      r.p_success = std::stod(next());
      r.trace_distance = std::stod(next());
      r.fidelity = std::stod(next());
      r.depth_single = std::stoi(next());
      r.depth_double = std::stoi(next());
      r.seed = std::stoull(next());
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("results: malformed row: " + line);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ── Execution ────────────────────────────────────────────────────────────────

ProtocolConfig protocol_for_index(const ExperimentConfig& cfg, int index,
                                  std::uint64_t* seed_out) {
  const std::uint64_t seed =
      derive_seed(cfg.master_seed, case_name(cfg.case_id), static_cast<std::uint64_t>(index));
  if (seed_out) *seed_out = seed;

  ProtocolConfig pc = cfg.protocol;
  pc.seed = seed;
  if (!cfg.sweep_phi_over_pi.empty()) {
    pc.free_evolution = FreeEvolution::rotation(
        pc.free_evolution.axis, cfg.sweep_phi_over_pi[static_cast<size_t>(index)] * M_PI);
  } else if (cfg.n_random > 0) {
    pc.interaction = Interaction::random_u(RandomUnitarySpec::from_seed(seed));
  } else if (cfg.case_id == CaseId::Case2Qpt) {
    static constexpr std::array<std::array<double, 2>, 4> kPrepAngles{
        {{0.0, 0.0}, {M_PI, 0.0}, {M_PI / 2, 0.0}, {M_PI / 2, M_PI / 2}}};
    const auto& [theta, phi] = kPrepAngles[static_cast<size_t>(index)];
    pc.initial_target = TargetPrep::pure(theta, phi);
  }
  return pc;
}

ResultRow campaign_row(const ExperimentConfig& cfg, int index) {
  std::uint64_t seed = 0;
  const ProtocolConfig pc = protocol_for_index(cfg, index, &seed);
  const double phi_over_pi = pc.free_evolution.is_rotation ? pc.free_evolution.angle / M_PI : 0.0;
  try {
    return row_from_result(cfg, index, phi_over_pi, seed, run_protocol(pc));
  } catch (const ResetNeverSucceeds&) {
    return row_without_reset(cfg, index, phi_over_pi, seed, build_protocol_circuit(pc).depth());
  }
}

std::vector<ResultRow> random_campaign(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.n_random <= 0) throw ConfigError("config: n_random must be at least 1");
  std::vector<ResultRow> rows(static_cast<size_t>(cfg.n_random));
  parallel_for(cfg.n_random, cfg.workers,
               [&](int i) { rows[static_cast<size_t>(i)] = campaign_row(cfg, i); });
  return rows;
}

std::vector<ResultRow> run_case(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::filesystem::path outdir(cfg.resolved_outdir());
  std::filesystem::create_directories(outdir);
  const std::string results_path = (outdir / "results.csv").string();

  const int total = expected_rows(cfg);
  std::vector<std::optional<ResultRow>> slots(static_cast<size_t>(total));
  if (std::filesystem::exists(results_path)) {
    for (ResultRow& row : read_results_csv(results_path)) {
      if (row.case_id == case_name(cfg.case_id) && row.index >= 0 && row.index < total)
        slots[static_cast<size_t>(row.index)] = std::move(row);
    }
  }

  json qpt_summary;
  if (cfg.case_id == CaseId::Case2Qpt) {
    // The four preparations feed the process-tomography bootstrap; rerun all
    // four (cheap) even when resuming so the χ pipeline sees fresh states.
    std::array<DensityMatrix, 4> finals;
    for (int i = 0; i < 4; ++i) {
      std::uint64_t seed = 0;
      const ProtocolConfig pc = protocol_for_index(cfg, i, &seed);
      const RunResult rr = run_protocol(pc);
      finals[static_cast<size_t>(i)] = rr.rho_final;
      slots[static_cast<size_t>(i)] = row_from_result(
          cfg, i, pc.free_evolution.is_rotation ? pc.free_evolution.angle / M_PI : 0.0, seed,
          rr);
    }
    const ProtocolConfig pc0 = protocol_for_index(cfg, 0, nullptr);
    const Mat lifted =
        lift_to_device(success_projector(pc0.resolved_projector_mode()), pc0.probe_order);
    BootstrapOptions opt;
    const TomographyOptions topt = cfg.tomography.value_or(TomographyOptions{});
    opt.n_sets = topt.n_bootstrap;
    opt.shots = topt.shots;
    opt.seed = cfg.master_seed;
    const BootstrapReport report = bootstrap_qpt(finals, lifted, kTargetSlot, opt);
    qpt_summary = json{{"process_fidelity", report.mean_fidelity},
                       {"error_bar", report.error_bar},
                       {"n_sets", report.n_sets},
                       {"shots_per_setting", report.shots_per_setting}};
  } else {
    std::vector<int> missing;
    for (int i = 0; i < total; ++i)
      if (!slots[static_cast<size_t>(i)]) missing.push_back(i);
    std::vector<ResultRow> fresh(missing.size());
    parallel_for(static_cast<int>(missing.size()), cfg.workers, [&](int k) {
      fresh[static_cast<size_t>(k)] = campaign_row(cfg, missing[static_cast<size_t>(k)]);
    });
    for (size_t k = 0; k < missing.size(); ++k)
      slots[static_cast<size_t>(missing[k])] = std::move(fresh[k]);
  }

  std::vector<ResultRow> rows;
  rows.reserve(static_cast<size_t>(total));
  for (std::optional<ResultRow>& s : slots) rows.push_back(std::move(*s));
  write_results_csv(results_path, rows);

  double mean_p, mean_d, mean_f;
  int n_success;
  aggregate(rows, mean_p, mean_d, mean_f, n_success);
  json summary;
  summary["case_id"] = case_name(cfg.case_id);
  summary["config"] = json::parse(config_to_json_text(cfg));
  summary["n_rows"] = static_cast<int>(rows.size());
  summary["aggregates"] = json{{"mean_p_success", mean_p},
                               {"mean_trace_distance", mean_d},
                               {"mean_fidelity", mean_f},
                               {"n_success", n_success}};
  if (!qpt_summary.is_null()) summary["qpt"] = qpt_summary;
  std::ofstream sj(outdir / "summary.json", std::ios::trunc);
  if (!sj) throw ConfigError("config: cannot write summary.json");
  sj << summary.dump(2) << '\n';

  if (cfg.n_random > 0) {
    emit_plot_data(cfg, rows, PlotKind::CumulativeAverage);
    emit_plot_data(cfg, rows, PlotKind::BarPerUnitary);
  }
  return rows;
}

// ── Noise calibration ────────────────────────────────────────────────────────

CalibrationResult calibrate_noise(const CalibrationTarget& target, const NoiseModel& base) {
  auto with_tphi = [&base](double tphi) {
    NoiseModel nm = base;
    nm.tphi_us.clear();
    nm.default_tphi_us = tphi;
    return nm;
  };

  std::function<double(double)> observable;
  bool increasing;
  if (target.kind == CalibrationTarget::Kind::FiveQubitFidelity) {
    ProtocolConfig pc;
    pc.initial_target = TargetPrep::minus();
    pc.free_evolution = FreeEvolution::rotation(RotationAxis::Z, 3 * M_PI / 8);
    pc.interaction = Interaction::deterministic(DetUSpec::XZ_iYX);
    const Mat rho_ideal = run_protocol(pc).rho_final.m;  // pure: fidelity = overlap
    observable = [pc, rho_ideal, &with_tphi](double tphi) {
      ProtocolConfig noisy = pc;
      noisy.noise = with_tphi(tphi);
      return std::real((rho_ideal * run_protocol(noisy).rho_final.m).trace());
    };
    increasing = true;  // longer Tφ, higher fidelity
  } else {
    const DensityMatrix minus = DensityMatrix::pure(bloch_state(M_PI / 2, M_PI));
    observable = [minus, &with_tphi](double tphi) {
      const NoiseModel nm = with_tphi(tphi);
      return trace_distance(apply_channel(idle_channel(1.0, nm, 0), minus, 0), minus);
    };
    increasing = false;  // longer Tφ, smaller trace distance
  }

  double lo = 0.1, hi = 1000.0;
  const double f_lo = observable(lo), f_hi = observable(hi);
  const double lo_val = increasing ? f_lo : f_hi;
  const double hi_val = increasing ? f_hi : f_lo;
  if (target.value < lo_val - 0.01 || target.value > hi_val + 0.01)
    throw ConfigError("calibrate_noise: target unreachable in bracket [0.1, 1000] us");

  for (int it = 0; it < 60 && (hi - lo) > 1e-4 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = observable(mid);
    if ((v < target.value) == increasing)
      lo = mid;
    else
      hi = mid;
  }

  CalibrationResult result;
  result.tphi_us = 0.5 * (lo + hi);
  result.model = with_tphi(result.tphi_us);
  result.achieved = observable(result.tphi_us);
  return result;
}

// ── Plot data ────────────────────────────────────────────────────────────────

void emit_plot_data(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows,
                    PlotKind kind) {
  if (rows.empty()) throw ConfigError("emit_plot_data: no rows");
  const std::filesystem::path dir = plotdata_dir(cfg);
  std::filesystem::create_directories(dir);

  switch (kind) {
    case PlotKind::BlochTrajectory: {
      const ProtocolConfig pc = protocol_for_index(cfg, 0, nullptr);
      std::ofstream out(dir / "bloch_trajectory.csv", std::ios::trunc);
      out << "label,step,x,y,z\n";
      auto emit = [&out](const std::string& label, int step, const DensityMatrix& rho) {
        const auto v = bloch_vector(rho);
        out << label << ',' << step << ',' << fmt_g12(v[0]) << ',' << fmt_g12(v[1]) << ','
            << fmt_g12(v[2]) << '\n';
      };
      emit("prep", 0, pc.initial_target.ideal_state());
      if (pc.free_evolution.is_rotation && std::abs(pc.free_evolution.angle) > 1e-15) {
        const auto trajectory =
            run_no_reset_baseline(pc, 4.0 * pc.free_evolution.angle);
        for (size_t k = 0; k < trajectory.size(); ++k)
          emit("no_reset", static_cast<int>(k) + 1, trajectory[k]);
      }
      emit("reset", 5, run_protocol(pc).rho_reset);
      break;
    }
    case PlotKind::BarPerUnitary: {
      std::ofstream out(dir / "bar_per_unitary.csv", std::ios::trunc);
      out << "index,p_success,trace_distance\n";
      for (const ResultRow& r : rows)
        out << r.index << ',' << fmt_g12(r.p_success) << ',' << fmt_g12(r.trace_distance)
            << '\n';
      break;
    }
    case PlotKind::CumulativeAverage: {
      std::ofstream out(dir / "cumulative_average.csv", std::ios::trunc);
      out << "index,cumulative_mean_p,cumulative_mean_trace_distance\n";
      double sum_p = 0.0, sum_d = 0.0;
      int n_d = 0;
      for (size_t i = 0; i < rows.size(); ++i) {
        sum_p += rows[i].p_success;
        if (rows[i].trace_distance >= 0.0) {
          sum_d += rows[i].trace_distance;
          ++n_d;
        }
        out << rows[i].index << ',' << fmt_g12(sum_p / static_cast<double>(i + 1)) << ','
            << fmt_g12(n_d > 0 ? sum_d / n_d : -1.0) << '\n';
      }
      break;
    }
    case PlotKind::DensityMatrixCity: {
      std::ofstream out(dir / "density_matrix_city.csv", std::ios::trunc);
      out << "row,col,re,im\n";
      Mat m;
      if (cfg.case_id == CaseId::Case2Qpt) {
        // Exact-expectation χ of the reconstructed reset process.
        std::array<DensityMatrix, 4> outputs;
        const ProtocolConfig pc0 = protocol_for_index(cfg, 0, nullptr);
        const Mat lifted =
            lift_to_device(success_projector(pc0.resolved_projector_mode()), pc0.probe_order);
        for (int i = 0; i < 4; ++i) {
          const RunResult rr = run_protocol(protocol_for_index(cfg, i, nullptr));
          const Mat projected = lifted * rr.rho_final.m * lifted;
          const double ps = std::real(projected.trace());
          outputs[static_cast<size_t>(i)] =
              make_physical(partial_trace_raw(projected / ps, kNumQubits, {kTargetSlot}));
        }
        m = cptp_project(qpt_chi(standard_qpt_inputs(), outputs)).m;
      } else {
        m = run_protocol(protocol_for_index(cfg, 0, nullptr)).rho_reset.m;
      }
      for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
          out << r << ',' << c << ',' << fmt_g12(std::real(m(r, c))) << ','
              << fmt_g12(std::imag(m(r, c))) << '\n';
      break;
    }
  }
}

}  // namespace qreset
