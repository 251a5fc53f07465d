#pragma once

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"
#include "tailgate/energyderiv.hpp"
#include "tailgate/normalmodes.hpp"
#include "tailgate/oracle.hpp"
#include "tailgate/tailgate.hpp"

namespace tailgate {

inline constexpr const char* kCheckpointSchema = "tailgate.checkpoint/1";

using json = nlohmann::json;

inline json to_json(const Gate& g) {
  return {{"kind", g.kind == GateKind::Single ? "single" : "double"}, {"wires", g.wires}, {"theta", g.theta}};
}

inline Gate gate_from_json(const json& j) {
  Gate g;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "single") g.kind = GateKind::Single;
  else if (kind == "double") g.kind = GateKind::Double;
  else throw_input("unknown gate kind '", kind, "'");
  g.wires = j.at("wires").get<std::vector<int>>();
  g.theta = j.value("theta", 0.0);
  return g;
}

inline json gates_to_json(const std::vector<Gate>& gates) {
  json a = json::array();
  for (const auto& g : gates) a.push_back(to_json(g));
  return a;
}

inline json to_json(const ScreeningReport& r) {
  json gates = json::array();
  for (const auto& s : r.gates)
    gates.push_back({{"pool_index", s.pool_index},
                     {"gate", s.gate.str()},
                     {"kind", s.gate.kind == GateKind::Single ? "single" : "double"},
                     {"wires", s.gate.wires},
                     {"max_gradient", s.max_gradient},
                     {"trigger", s.trigger},
                     {"trigger_label", coords_str(s.trigger)},
                     {"selected", s.selected}});
  return {{"epsilon", std::isfinite(r.epsilon) ? json(r.epsilon) : json("inf")},
          {"derivative_order", r.derivative_order},
          {"selected_count", r.selected().size()},
          {"gates", gates}};
}

inline ScreeningReport screening_from_json(const json& j) {
  ScreeningReport r;
  r.epsilon = j.at("epsilon").is_string() ? std::numeric_limits<double>::infinity() : j.at("epsilon").get<double>();
  r.derivative_order = j.value("derivative_order", 0);
  for (const auto& g : j.at("gates")) {
    GateScreen s;
    s.pool_index = g.at("pool_index").get<std::size_t>();
    s.gate = gate_from_json(g);
    s.gate.theta = 0.0;
    s.max_gradient = g.at("max_gradient").get<double>();
    s.trigger = g.at("trigger").get<std::vector<int>>();
    s.selected = g.at("selected").get<bool>();
    r.gates.push_back(std::move(s));
  }
  return r;
}

/// Circuit plus run metadata persisted between CLI stages.
struct Checkpoint {
  std::string molecule;
  std::string grid_hash;
  TailgatedCircuit circuit;  // empty tail before tailgating
  bool tailgated = false;
  double energy = 0.0;
  std::optional<double> exact_energy;
  std::optional<double> fidelity;
  double gradient_max = 0.0;
  bool converged = false;
  std::string stop_reason;
  json settings = json::object();
};

inline std::string utc_timestamp() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline json to_json(const Checkpoint& c) {
  json j{{"schema", kCheckpointSchema},
         {"molecule", c.molecule},
         {"grid_hash", c.grid_hash},
         {"n_qubits", c.circuit.head.n_qubits},
         {"reference", c.circuit.head.reference_occupations},
         {"head", gates_to_json(c.circuit.head.gates)},
         {"tail", gates_to_json(c.circuit.tail)},
         {"tailgated", c.tailgated},
         {"energy", c.energy},
         {"gradient_max", c.gradient_max},
         {"converged", c.converged},
         {"stop_reason", c.stop_reason},
         {"settings", c.settings},
         {"circuit_hash", circuit_hash(c.circuit.full())},
         {"timestamp", utc_timestamp()}};
  if (c.exact_energy) j["exact_energy"] = *c.exact_energy;
  if (c.fidelity) j["fidelity"] = *c.fidelity;
  if (c.tailgated) j["selection_report"] = to_json(c.circuit.selection_report);
  return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
  if (!j.contains("schema") || j.at("schema") != kCheckpointSchema)
    throw_input("not a checkpoint (expected schema ", kCheckpointSchema, ")");
  Checkpoint c;
  c.molecule = j.value("molecule", "");
  c.grid_hash = j.value("grid_hash", "");
  auto& head = c.circuit.head;
  head.n_qubits = j.at("n_qubits").get<int>();
  for (int q : j.at("reference")) head.reference_occupations.insert(q);
  for (const auto& g : j.at("head")) head.gates.push_back(gate_from_json(g));
  for (const auto& g : j.at("tail")) c.circuit.tail.push_back(gate_from_json(g));
  c.tailgated = j.value("tailgated", false);
  c.energy = j.at("energy").get<double>();
  if (j.contains("exact_energy")) c.exact_energy = j.at("exact_energy").get<double>();
  if (j.contains("fidelity")) c.fidelity = j.at("fidelity").get<double>();
  c.gradient_max = j.value("gradient_max", 0.0);
  c.converged = j.value("converged", false);
  c.stop_reason = j.value("stop_reason", "");
  c.settings = j.value("settings", json::object());
  if (j.contains("selection_report")) c.circuit.selection_report = screening_from_json(j.at("selection_report"));
  c.circuit.validate();
  return c;
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_input("cannot open checkpoint '", path, "'");
  try {
    return checkpoint_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw_input(path, ": malformed checkpoint: ", e.what());
  }
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != m.cols()) throw_input("ragged matrix in JSON");
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

inline json to_json(const HessianResult& h) {
  std::vector<double> grad(h.gradient.data(), h.gradient.data() + h.gradient.size());
  return {{"units", "hartree/bohr^2"},
          {"matrix", matrix_to_json(h.matrix)},
          {"asymmetry", h.asymmetry},
          {"asymmetry_warning", h.asymmetry_warning()},
          {"gradient", grad},
          {"gradient_units", "hartree/bohr"},
          {"parameter_gradient_max", h.parameter_gradient_max},
          {"response_rank", h.response_rank},
          {"response_residual_max", h.response_residual_max},
          {"n_params", h.n_params},
          {"tail_size", h.tail_size},
          {"circuit_hash", h.circuit_hash},
          {"grid_hash", h.grid_hash},
          {"epsilon", std::isnan(h.epsilon) ? json(nullptr) : std::isinf(h.epsilon) ? json("inf") : json(h.epsilon)},
          {"step_bohr", h.step}};
}

/// Whitespace-separated rows, full precision.
inline std::string matrix_text(const Eigen::MatrixXd& m) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j);
    os << "\n";
  }
  return os.str();
}

inline json to_json(const ModeResult& r) {
  json modes = json::array();
  for (std::size_t k = 0; k < r.frequencies.size(); ++k) {
    const auto col = r.eigenvectors.col(static_cast<Eigen::Index>(k));
    modes.push_back({{"frequency_cm1", r.frequencies[k]},
                     {"imaginary", static_cast<bool>(r.imaginary[k])},
                     {"vector", std::vector<double>(col.data(), col.data() + col.size())}});
  }
  return {{"units", "cm^-1"},
          {"frequencies", r.frequencies},
          {"dropped_modes", r.dropped_modes},
          {"dropped_frequencies", r.dropped},
          {"conversion_cm1", wavenumber_conversion()},
          {"modes", modes}};
}

inline std::string frequencies_csv(const ModeResult& r) {
  std::ostringstream os;
  os << "mode,frequency_cm1,imaginary\n" << std::setprecision(10);
  for (std::size_t k = 0; k < r.frequencies.size(); ++k)
    os << k + 1 << "," << r.frequencies[k] << "," << (r.imaginary[k] ? 1 : 0) << "\n";
  return os.str();
}

/// One delta column plus (fidelity, derivative, flagged) per named curve;
/// curves must share their delta samples.
inline std::string fidelity_csv(const std::vector<std::pair<std::string, std::vector<FidelityPoint>>>& curves) {
  std::ostringstream os;
  os << "delta";
  for (const auto& [name, pts] : curves) os << "," << name << "_fidelity," << name << "_dfidelity," << name << "_flagged";
  os << "\n" << std::setprecision(12);
  const std::size_t n = curves.empty() ? 0 : curves.front().second.size();
  for (const auto& [name, pts] : curves)
    if (pts.size() != n) throw_input("fidelity curves have different sample counts");
  for (std::size_t k = 0; k < n; ++k) {
    os << curves.front().second[k].delta;
    for (const auto& [name, pts] : curves) os << "," << pts[k].fidelity << "," << pts[k].derivative << "," << (pts[k].flagged ? 1 : 0);
    os << "\n";
  }
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw_input("cannot write '", path, "'");
  out << text;
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace tailgate
