#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tailgate/checks.hpp"
#include "tailgate/pipeline.hpp"

using namespace tailgate;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kWarning = 1;
constexpr int kInvalid = 2;

// Above this many qubits `ham` skips the ground-state solve.
constexpr int kHamOracleCap = 14;

struct Options {
  std::string manifest;
  std::string out = ".";
  std::vector<std::string> checkpoints;
  double epsilon = 1e-5;
  int order = 2;
  double vqe_tol = AdaptConfig{}.vqe_grad_tol;
  double fd_step = 0.0;  // 0: manifest step
  double delta_min = -0.75;
  double delta_max = 0.75;
  int delta_steps = 31;
  unsigned seed = 7;
  bool validate = false;
  bool reoptimize = false;
  bool oracle = false;
  double drop = 50.0;
  std::size_t max_gates = AdaptConfig{}.max_gates;
  std::vector<double> direction;
};

void note(const std::string& s) { std::cerr << s << "\n"; }

fs::path out_path(const Options& o, const std::string& name) {
  fs::create_directories(o.out);
  return fs::path(o.out) / name;
}

struct LoadedGrid {
  HamiltonianGrid grid;  // at the requested finite-difference step
  std::string hash;      // of the manifest grid, as stored in checkpoints
};

LoadedGrid load(const Options& o) {
  if (o.manifest.empty()) throw_input("--manifest is required");
  if (!fs::exists(o.manifest)) throw_input("manifest '", o.manifest, "' does not exist");
  LoadedGrid g{load_grid(o.manifest), ""};
  g.hash = grid_hash(g.grid);
  if (o.validate) {
    const auto r = validate_grid(g.grid);
    note(detail::concat("gauge check: ", r.pairs_checked, " neighbour pairs, ", r.violations.size(), " violations"));
    for (const auto& v : r.violations)
      note(detail::concat("  ", displacement_str(v.from), " -> ", displacement_str(v.to), ": ", v.max_change));
    if (!r.ok()) throw_input("grid failed gauge validation");
  }
  if (o.fd_step > 0) g.grid = with_step(g.grid, o.fd_step);
  return g;
}

Checkpoint load_checkpoint(const std::string& path, const LoadedGrid& g) {
  auto c = read_checkpoint(path);
  if (!c.grid_hash.empty() && c.grid_hash != g.hash)
    throw_input("checkpoint '", path, "' was built on a different grid (", c.grid_hash, " vs ", g.hash, ")");
  if (c.circuit.head.n_qubits != 2 * g.grid.base().n_orbitals) throw_input("checkpoint qubit count does not match grid");
  return c;
}

const std::string& single_checkpoint(const Options& o) {
  if (o.checkpoints.size() != 1) throw_input("exactly one --checkpoint is required");
  return o.checkpoints.front();
}

AdaptConfig adapt_config(const Options& o) {
  AdaptConfig cfg;
  cfg.vqe_grad_tol = o.vqe_tol;
  cfg.max_gates = o.max_gates;
  cfg.validate();
  return cfg;
}

int cmd_ham(const Options& o) {
  const auto g = load(o);
  const auto& ints = g.grid.base();
  const PauliSum h = assemble_hamiltonian(ints);
  json j{{"molecule", g.grid.molecule},
         {"qubits", h.n_qubits()},
         {"terms", h.terms().size()},
         {"orbitals", ints.n_orbitals},
         {"electrons", ints.n_electrons},
         {"grid_points", g.grid.points.size()},
         {"coordinates", g.grid.coordinate_count()},
         {"step_bohr", g.grid.step},
         {"scan_points", g.grid.scan.size()},
         {"grid_hash", g.hash}};
  if (h.n_qubits() <= kHamOracleCap) j["ground_energy"] = exact_ground_state(h, molecular_sector(ints)).energy;
  std::cout << detail::concat(g.grid.molecule, ": ", h.n_qubits(), " qubits, ", h.terms().size(), " terms") << "\n";
  if (j.contains("ground_energy")) std::printf("ground energy %.12f Ha\n", j["ground_energy"].get<double>());
  write_json(out_path(o, "ham.json"), j);
  return kOk;
}

int cmd_adapt(const Options& o) {
  const auto g = load(o);
  const auto cfg = adapt_config(o);
  auto c = run_adapt(g.grid, cfg, 2 * g.grid.base().n_orbitals <= 16, [](const AdaptStep& s) {
    std::fprintf(stderr, "gate %zu  |g| %.3e  E %.10f  (%zu iterations)\n", s.pool_index, s.selection_gradient,
                 s.energy, s.vqe_iterations);
  });
  c.grid_hash = g.hash;
  c.settings["seed"] = o.seed;
  const auto path = out_path(o, "checkpoint.json");
  write_json(path, to_json(c));
  std::printf("%zu gates, E = %.10f Ha, stop: %s\n", c.circuit.head.gates.size(), c.energy, c.stop_reason.c_str());
  if (c.fidelity) std::printf("fidelity %.8f against E_exact = %.10f Ha\n", *c.fidelity, *c.exact_energy);
  std::printf("wrote %s\n", path.c_str());
  return c.converged ? kOk : kWarning;
}

int cmd_tailgate(const Options& o) {
  const auto g = load(o);
  if (std::isnan(o.epsilon) || o.epsilon < 0) throw_input("--epsilon must be non-negative");
  const auto c = run_tailgate(load_checkpoint(single_checkpoint(o), g), g.grid, o.order, o.epsilon);
  const auto path = out_path(o, "tailgated.json");
  write_json(path, to_json(c));
  write_json(out_path(o, "selection.json"), to_json(c.circuit.selection_report));
  std::printf("%zu head gates, %zu tail gates (order %d, epsilon %g)\n", c.circuit.head_size(), c.circuit.tail.size(),
              o.order, o.epsilon);
  std::printf("wrote %s\n", path.c_str());
  return kOk;
}

HessianResult circuit_hessian(const Options& o, const LoadedGrid& g) {
  const auto c = load_checkpoint(single_checkpoint(o), g);
  auto h = hessian(c.circuit, g.grid);
  if (c.settings.contains("epsilon") && c.settings["epsilon"].is_number()) h.epsilon = c.settings["epsilon"];
  return h;
}

bool hessian_warns(const HessianResult& h) {
  bool warn = false;
  if (h.asymmetry_warning()) {
    note(detail::concat("warning: Hessian asymmetry ", h.asymmetry));
    warn = true;
  }
  if (h.response_residual_max > 1e-6) {
    note(detail::concat("warning: response residual ", h.response_residual_max));
    warn = true;
  }
  return warn;
}

int cmd_hessian(const Options& o) {
  const auto g = load(o);
  const auto h = circuit_hessian(o, g);
  write_json(out_path(o, "hessian.json"), to_json(h));
  write_text(out_path(o, "hessian.txt"), matrix_text(h.matrix));
  std::printf("%lldx%lld Hessian, %zu parameters (%zu tail), asymmetry %.2e\n", static_cast<long long>(h.matrix.rows()),
              static_cast<long long>(h.matrix.cols()), h.n_params, h.tail_size, h.asymmetry);
  return hessian_warns(h) ? kWarning : kOk;
}

void print_modes(const char* label, const ModeResult& m) {
  std::printf("%s:", label);
  for (std::size_t k = 0; k < m.frequencies.size(); ++k) std::printf(" %.2f%s", m.frequencies[k], m.imaginary[k] ? "i" : "");
  std::printf("  (%zu dropped)\n", m.dropped_modes);
}

int cmd_freq(const Options& o) {
  const auto g = load(o);
  if (o.checkpoints.empty() && !o.oracle) throw_input("freq needs --checkpoint, --oracle, or both");
  bool warn = false;
  if (!o.checkpoints.empty()) {
    const auto h = circuit_hessian(o, g);
    warn = hessian_warns(h);
    const auto m = normal_modes(h.matrix, g.grid.base_geometry, o.drop);
    write_json(out_path(o, "hessian.json"), to_json(h));
    write_json(out_path(o, "modes.json"), to_json(m));
    write_text(out_path(o, "frequencies.csv"), frequencies_csv(m));
    print_modes("circuit", m);
    for (bool im : m.imaginary) warn = warn || im;
  }
  if (o.oracle) {
    const auto om = oracle_modes(g.grid, o.drop);
    write_json(out_path(o, "oracle_modes.json"), to_json(om.modes));
    write_text(out_path(o, "oracle_frequencies.csv"), frequencies_csv(om.modes));
    write_json(out_path(o, "oracle_hessian.json"), matrix_to_json(om.hessian));
    print_modes("oracle ", om.modes);
  }
  return warn ? kWarning : kOk;
}

int cmd_fidelity(const Options& o) {
  const auto g = load(o);
  if (o.checkpoints.empty()) throw_input("fidelity needs at least one --checkpoint");
  if (o.delta_steps < 1 || !(o.delta_max >= o.delta_min)) throw_input("invalid delta range");
  Eigen::VectorXd dir;
  if (!o.direction.empty()) dir = Eigen::Map<const Eigen::VectorXd>(o.direction.data(), static_cast<Eigen::Index>(o.direction.size()));
  const auto hams = scan_hamiltonians(g.grid, o.delta_min, o.delta_max, o.delta_steps, dir);
  const auto cfg = adapt_config(o);
  const Sector s = molecular_sector(g.grid.base());
  std::vector<std::pair<std::string, std::vector<FidelityPoint>>> curves;
  bool warn = false;
  for (const auto& path : o.checkpoints) {
    const auto c = load_checkpoint(path, g);
    const Circuit full = c.circuit.full();
    auto pts = o.reoptimize ? reoptimized_fidelity(full, g.grid, hams, cfg)
                            : fidelity_scan(hams, s, [&](const PauliSum&, double) { return std::pair{run_circuit(full), true}; });
    for (const auto& p : pts) warn = warn || p.flagged;
    std::string name = fs::path(path).stem().string();
    for (const auto& [other, unused] : curves)
      if (other == name) name += std::to_string(curves.size());
    double worst = 0.0;
    for (const auto& p : pts) worst = std::max(worst, std::abs(p.derivative));
    std::printf("%s: %zu samples, fidelity %.6f .. %.6f, max |dF/d delta| %.4g\n", name.c_str(), pts.size(),
                pts.front().fidelity, pts.back().fidelity, worst);
    curves.emplace_back(name, std::move(pts));
  }
  write_text(out_path(o, "fidelity.csv"), fidelity_csv(curves));
  return warn ? kWarning : kOk;
}

int cmd_validate(const Options& o) {
  Options plain = o;
  plain.validate = false;  // validate_all runs the gauge check itself
  auto g = load(plain);
  const auto r = validate_all(g.grid, o.seed);
  write_json(out_path(o, "validation.json"), to_json(r));
  std::printf("gauge: %s (%zu pairs, %zu violations)\n", r.gauge.ok() ? "ok" : "FAILED", r.gauge.pairs_checked,
              r.gauge.violations.size());
  for (const auto& c : r.checks)
    std::printf("%-4s %s: %.3g (tolerance %.3g) %s\n", c.passed ? "ok" : "FAIL", c.name.c_str(), c.value, c.tolerance,
                c.detail.c_str());
  if (!r.gauge.ok()) return kInvalid;
  return r.passed() ? kOk : kWarning;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy derivatives of adaptive variational circuits with tailgated gates"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--manifest", o.manifest, "grid manifest (JSON)")->required();
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--fd-step", o.fd_step, "finite-difference step in bohr, a multiple of the manifest step");
    sub->add_option("--seed", o.seed, "seed for randomized checks")->capture_default_str();
    sub->add_flag("--validate", o.validate, "run the gauge-consistency check on the grid first");
  };
  auto with_checkpoint = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--checkpoint", o.checkpoints, "circuit checkpoint (JSON)");
    if (required) opt->required();
  };
  auto with_vqe = [&](CLI::App* sub) {
    sub->add_option("--vqe-tol", o.vqe_tol, "VQE gradient tolerance")->capture_default_str();
    sub->add_option("--max-gates", o.max_gates, "adaptive circuit size cap")->capture_default_str();
  };

  auto* ham = app.add_subcommand("ham", "Hamiltonian summary");
  common(ham);
  auto* adapt = app.add_subcommand("adapt", "build and optimize the adaptive circuit at R0");
  common(adapt);
  with_vqe(adapt);
  auto* tg = app.add_subcommand("tailgate", "screen the pool against Hamiltonian derivatives and append the tail");
  common(tg);
  with_checkpoint(tg, true);
  tg->add_option("--order", o.order, "target energy-derivative order")->capture_default_str();
  tg->add_option("--epsilon", o.epsilon, "screening threshold")->capture_default_str();
  auto* hs = app.add_subcommand("hessian", "analytic energy Hessian of a checkpoint");
  common(hs);
  with_checkpoint(hs, true);
  auto* fq = app.add_subcommand("freq", "normal-mode frequencies");
  common(fq);
  with_checkpoint(fq, false);
  fq->add_flag("--oracle", o.oracle, "also compute exact finite-difference frequencies");
  fq->add_option("--drop", o.drop, "drop modes below this |frequency| (cm^-1)")->capture_default_str();
  auto* fi = app.add_subcommand("fidelity", "fidelity against the exact ground state along a scan");
  common(fi);
  with_checkpoint(fi, true);
  with_vqe(fi);
  fi->add_option("--delta-min", o.delta_min, "scan start (bohr)")->capture_default_str();
  fi->add_option("--delta-max", o.delta_max, "scan end (bohr)")->capture_default_str();
  fi->add_option("--delta-steps", o.delta_steps, "samples when no stored scan is used")->capture_default_str();
  fi->add_option("--direction", o.direction, "displacement direction (one entry per coordinate)");
  fi->add_flag("--reoptimize", o.reoptimize, "re-run VQE at every sample, warm-started at the checkpoint");
  auto* va = app.add_subcommand("validate", "property suite on a grid");
  common(va);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  try {
    if (*ham) return cmd_ham(o);
    if (*adapt) return cmd_adapt(o);
    if (*tg) return cmd_tailgate(o);
    if (*hs) return cmd_hessian(o);
    if (*fq) return cmd_freq(o);
    if (*fi) return cmd_fidelity(o);
    if (*va) return cmd_validate(o);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kWarning;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kOk;
}
