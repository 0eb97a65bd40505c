// oseen-spectral: mixed FEM eigensolver for the Oseen problem on 2D domains.
// Subcommands: solve | uniform | adapt | stokes-limit | mesh.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "oseen/adaptivity.hpp"
#include "oseen/analysis.hpp"
#include "oseen/assembly.hpp"
#include "oseen/eigensolver.hpp"
#include "oseen/estimator.hpp"
#include "oseen/mesh.hpp"
#include "oseen/vtk.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace oseen;

namespace {

constexpr const char* kVersion = "1.0.0";

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitWrite = 4;

struct RunConfig {
  std::string command;
  std::string domain = "square";  // square | lshape | mesh file path
  int n = 20;
  double nu = 1.0;
  std::vector<double> beta = {1.0, 0.0};
  std::string element = "mini";  // mini | th
  int nev = 4;
  double shift = 0.0;
  double tol = 1e-9;
  std::string estimator = "eta";
  int iterations = 15;
  long max_dof = 200000;
  int target = 0;
  double lambda_ref = std::numeric_limits<double>::quiet_NaN();
  std::vector<int> levels = {20, 30, 40, 50};
  std::vector<int> exponents = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  std::string out = ".";
  bool dump_meshes = false;
  bool vtk = false;
  bool dump_matrices = false;
  unsigned long seed = 42;
};

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct write_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void apply_json_config(const json& j, CLI::App* cmd, RunConfig& cfg) {
  auto set_if = [&](const char* key, auto& field) {
    const CLI::Option* opt = cmd->get_option_no_throw(std::string("--") + key);
    if (j.contains(key) && !j.at(key).is_null() && (!opt || opt->count() == 0))
      j.at(key).get_to(field);
  };
  set_if("domain", cfg.domain);
  set_if("n", cfg.n);
  set_if("nu", cfg.nu);
  set_if("beta", cfg.beta);
  set_if("element", cfg.element);
  set_if("nev", cfg.nev);
  set_if("shift", cfg.shift);
  set_if("tol", cfg.tol);
  set_if("estimator", cfg.estimator);
  set_if("iterations", cfg.iterations);
  set_if("max_dof", cfg.max_dof);
  set_if("target", cfg.target);
  set_if("lambda_ref", cfg.lambda_ref);
  set_if("levels", cfg.levels);
  set_if("exponents", cfg.exponents);
  set_if("out", cfg.out);
  set_if("dump_meshes", cfg.dump_meshes);
  set_if("vtk", cfg.vtk);
  set_if("dump_matrices", cfg.dump_matrices);
  set_if("seed", cfg.seed);
}

void validate(const RunConfig& cfg) {
  if (!(cfg.nu > 0.0)) throw config_error("nu must be positive");
  if (cfg.beta.size() != 2) throw config_error("beta must have two components");
  if (cfg.element != "mini" && cfg.element != "th")
    throw config_error("element must be 'mini' or 'th'");
  if (cfg.estimator != "eta" && cfg.estimator != "etastar" && cfg.estimator != "theta")
    throw config_error("estimator must be eta, etastar or theta");
  if (cfg.nev < 1) throw config_error("nev must be >= 1");
  if (!(cfg.tol > 0.0)) throw config_error("tol must be positive");
  if (cfg.n < 1) throw config_error("n must be >= 1");
  if (cfg.domain != "square" && cfg.domain != "lshape" && !fs::exists(cfg.domain))
    throw config_error("domain '" + cfg.domain +
                       "' is neither square/lshape nor an existing mesh file");
}

ElementKind element_of(const RunConfig& cfg) {
  return cfg.element == "mini" ? ElementKind::mini : ElementKind::taylor_hood;
}

OseenParams params_of(const RunConfig& cfg) {
  OseenParams p;
  p.nu = cfg.nu;
  p.beta = {cfg.beta[0], cfg.beta[1]};
  return p;
}

SolverConfig solver_of(const RunConfig& cfg) {
  SolverConfig s;
  s.nev = cfg.nev;
  s.shift = {cfg.shift, 0.0};
  s.tol = cfg.tol;
  s.seed = cfg.seed;
  return s;
}

Mesh mesh_of(const RunConfig& cfg) {
  if (cfg.domain == "square") return generate_square(cfg.n);
  if (cfg.domain == "lshape") return generate_lshape(cfg.n);
  try {
    return load_mesh(cfg.domain);
  } catch (const std::exception& e) {
    throw config_error(e.what());  // malformed mesh files are config errors
  }
}

json config_json(const RunConfig& cfg) {
  return json{{"command", cfg.command},
              {"domain", cfg.domain},
              {"n", cfg.n},
              {"nu", cfg.nu},
              {"beta", cfg.beta},
              {"element", cfg.element},
              {"nev", cfg.nev},
              {"shift", cfg.shift},
              {"tol", cfg.tol},
              {"estimator", cfg.estimator},
              {"iterations", cfg.iterations},
              {"max_dof", cfg.max_dof},
              {"target", cfg.target},
              {"lambda_ref", cfg.lambda_ref},
              {"levels", cfg.levels},
              {"exponents", cfg.exponents},
              {"out", cfg.out},
              {"dump_meshes", cfg.dump_meshes},
              {"vtk", cfg.vtk},
              {"dump_matrices", cfg.dump_matrices},
              {"seed", cfg.seed}};
}

// atomic file write: temp + rename
void write_file(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw write_error("cannot open " + tmp.string());
    out << content;
    if (!out) throw write_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw write_error("rename failed for " + path.string());
}

void write_manifest(const RunConfig& cfg, const json& extra = json::object()) {
  json m = config_json(cfg);
  m["tool"] = "oseen-spectral";
  m["version"] = kVersion;
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_file(fs::path(cfg.out) / "manifest.json", m.dump(2) + "\n");
}

json eigenvalue_json(const std::vector<EigenPair>& pairs) {
  json arr = json::array();
  for (const EigenPair& ep : pairs)
    arr.push_back(
        {{"re", ep.lambda.real()}, {"im", ep.lambda.imag()}, {"residual", ep.residual}});
  return arr;
}

int cmd_solve(const RunConfig& cfg) {
  const Mesh mesh = mesh_of(cfg);
  const DofMap dofmap = build_dofmap(mesh, element_of(cfg));
  const OseenParams params = params_of(cfg);
  const Forms forms = assemble_forms(mesh, dofmap, params);
  const Pencil pencil = build_primal_pencil(forms, dofmap);

  std::vector<EigenPair> pairs;
  try {
    pairs = shift_invert_solve(pencil, solver_of(cfg));
  } catch (const std::exception& e) {
    std::cout << json{{"error", e.what()}, {"stage", "solve"}}.dump() << "\n";
    return kExitSolver;
  }

  json out{{"nu", cfg.nu},
           {"beta", cfg.beta},
           {"element", cfg.element},
           {"domain", cfg.domain},
           {"n", cfg.n},
           {"dof", dofmap.reported_dof()},
           {"system_dim", pencil.dim()},
           {"tol", cfg.tol},
           {"seed", cfg.seed},
           {"eigenvalues", eigenvalue_json(pairs)}};
  write_file(fs::path(cfg.out) / "eigenvalues.json", out.dump(2) + "\n");

  if (cfg.vtk) {
    const EigenPair& target = pairs.at(std::min<size_t>(cfg.target, pairs.size() - 1));
    const EstimateReport rep = primal_indicators(mesh, dofmap, params, target);
    export_vtk(mesh, dofmap, target, (fs::path(cfg.out) / "solution.vtk").string(),
               &rep.per_cell);
  }
  if (cfg.dump_matrices) {
    write_matrix_market(pencil.K, (fs::path(cfg.out) / "K.mtx").string());
    write_matrix_market(pencil.M, (fs::path(cfg.out) / "M.mtx").string());
  }
  write_manifest(cfg);
  std::cout << out["eigenvalues"].dump() << "\n";
  return 0;
}

int cmd_uniform(const RunConfig& cfg) {
  if (cfg.domain != "square" && cfg.domain != "lshape")
    throw config_error("uniform study needs --domain square or lshape");
  const Domain dom = cfg.domain == "square" ? Domain::square : Domain::lshape;
  UniformStudy study;
  try {
    study = uniform_study(dom, params_of(cfg), element_of(cfg), cfg.levels, solver_of(cfg),
                          cfg.target);
  } catch (const std::invalid_argument& e) {
    throw config_error(e.what());
  } catch (const std::exception& e) {
    std::cout << json{{"error", e.what()}, {"stage", "uniform"}}.dump() << "\n";
    return kExitSolver;
  }
  std::ostringstream csv;
  write_uniform_csv(study, csv);
  write_file(fs::path(cfg.out) / "uniform.csv", csv.str());
  json fits = json::array();
  for (size_t k = 0; k < study.fits.size(); ++k)
    fits.push_back({{"k", k},
                    {"lambda_extr", study.fits[k].lambda_extr},
                    {"C", study.fits[k].C},
                    {"alpha", study.fits[k].alpha},
                    {"rms", study.fits[k].rms}});
  write_manifest(cfg, json{{"fits", fits}, {"imag_warning", study.imag_warning}});
  std::cout << fits.dump() << "\n";
  return 0;
}

int cmd_adapt(const RunConfig& cfg) {
  AdaptConfig acfg;
  acfg.estimator = cfg.estimator == "eta"       ? EstimatorKind::eta
                   : cfg.estimator == "etastar" ? EstimatorKind::etastar
                                                : EstimatorKind::theta;
  acfg.max_iterations = cfg.iterations;
  acfg.max_dof = cfg.max_dof;
  acfg.target_index = cfg.target;
  acfg.reference_eigenvalue = cfg.lambda_ref;
  if (std::isnan(acfg.reference_eigenvalue) && cfg.domain == "lshape" && cfg.target == 0)
    acfg.reference_eigenvalue = 32.963150646072528;  // published L-shape limit

  std::vector<std::string> dumped;
  AdaptCallback cb;
  if (cfg.dump_meshes) {
    cb = [&](int it, const Mesh& m, const EstimateReport* prep, const EstimateReport*,
             const MarkedSet&) {
      char name[64];
      std::snprintf(name, sizeof(name), "mesh_%03d.oseen-mesh", it);
      save_mesh(m, (fs::path(cfg.out) / name).string());
      dumped.push_back(name);
      if (prep) {
        std::snprintf(name, sizeof(name), "indicators_%03d.vtk", it);
        DofMap d = build_dofmap(m, element_of(cfg));
        EigenPair dummy;
        dummy.lambda = 0.0;
        dummy.u = VectorXc::Zero(2 * d.n_vel);
        dummy.p = VectorXc::Zero(d.n_press);
        export_vtk(m, d, dummy, (fs::path(cfg.out) / name).string(), &prep->per_cell);
      }
    };
  }

  AdaptResult res =
      adapt_loop(mesh_of(cfg), params_of(cfg), element_of(cfg), solver_of(cfg), acfg, cb);
  std::ostringstream csv;
  write_adapt_csv(res.records, csv);
  write_file(fs::path(cfg.out) / "adaptive.csv", csv.str());
  write_manifest(cfg, json{{"completed", res.completed},
                           {"error", res.error},
                           {"iterations_run", res.records.size()},
                           {"reference_eigenvalue", acfg.reference_eigenvalue},
                           {"dumped_meshes", dumped}});
  if (!res.completed) {
    std::cout << json{{"error", res.error},
                      {"stage", "adapt"},
                      {"records", res.records.size()}}
                     .dump()
              << "\n";
    return kExitSolver;
  }
  std::cout << json{{"iterations", res.records.size()},
                    {"final_dof", res.records.back().dof},
                    {"final_lambda_re", res.records.back().lambda.real()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_stokes_limit(const RunConfig& cfg) {
  if (cfg.domain != "square" && cfg.domain != "lshape")
    throw config_error("stokes-limit study needs --domain square or lshape");
  const Domain dom = cfg.domain == "square" ? Domain::square : Domain::lshape;
  StokesLimitStudy study;
  try {
    study = stokes_limit_study(dom, element_of(cfg), cfg.exponents, cfg.n, cfg.nu,
                               solver_of(cfg), cfg.nev);
  } catch (const std::invalid_argument& e) {
    throw config_error(e.what());
  } catch (const std::exception& e) {
    std::cout << json{{"error", e.what()}, {"stage", "stokes-limit"}}.dump() << "\n";
    return kExitSolver;
  }
  std::ostringstream csv;
  write_stokes_csv(study, csv);
  write_file(fs::path(cfg.out) / "stokes_limit.csv", csv.str());
  json gaps = json::array();
  for (size_t i = 0; i < study.exponents.size(); ++i)
    gaps.push_back({{"i", study.exponents[i]}, {"gap", study.gap_by_exp[i]}});
  write_manifest(cfg, json{{"gaps", gaps}, {"stokes", study.stokes}});
  std::cout << gaps.dump() << "\n";
  return 0;
}

int cmd_mesh(const RunConfig& cfg) {
  const Mesh mesh = mesh_of(cfg);
  const fs::path path = fs::path(cfg.out) / "mesh.oseen-mesh";
  save_mesh(mesh, path.string());
  json out{{"vertices", mesh.n_vertices()},
           {"cells", mesh.n_cells()},
           {"edges", mesh.n_edges()},
           {"h_max", mesh.max_diameter()},
           {"min_angle_deg", mesh.min_angle() * 180.0 / M_PI},
           {"file", path.string()}};
  write_manifest(cfg);
  std::cout << out.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("OSEEN_SPECTRAL_THREADS"))
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));

  CLI::App app{"Mixed finite-element eigensolver for the 2D Oseen problem"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file (flags override it)");
    cmd->add_option("--domain", cfg.domain, "square | lshape | mesh file path");
    cmd->add_option("--n", cfg.n, "subdivisions for generated domains");
    cmd->add_option("--nu", cfg.nu, "kinematic viscosity");
    cmd->add_option("--beta", cfg.beta, "convective velocity BX,BY")
        ->delimiter(',')
        ->expected(1, 2);
    cmd->add_option("--element", cfg.element, "mini | th");
    cmd->add_option("--nev", cfg.nev, "number of eigenvalues");
    cmd->add_option("--shift", cfg.shift, "shift-invert target (real)");
    cmd->add_option("--tol", cfg.tol, "solver residual tolerance");
    cmd->add_option("--target", cfg.target, "target eigenvalue index");
    cmd->add_option("--out", cfg.out, "output directory");
    cmd->add_option("--seed", cfg.seed, "start-vector seed");
    return cmd;
  };

  CLI::App* solve = add_common(app.add_subcommand("solve", "single eigensolve"));
  solve->add_flag("--vtk", cfg.vtk, "export the target eigenmode as legacy VTK");
  solve->add_flag("--dump-matrices", cfg.dump_matrices,
                  "export K and M in Matrix Market form");

  CLI::App* uniform = add_common(app.add_subcommand("uniform", "uniform refinement study"));
  uniform->add_option("--levels", cfg.levels, "mesh levels N")->delimiter(',');

  CLI::App* adapt = add_common(app.add_subcommand("adapt", "adaptive refinement study"));
  adapt->add_option("--estimator", cfg.estimator, "eta | etastar | theta");
  adapt->add_option("--iterations", cfg.iterations, "adaptive iterations");
  adapt->add_option("--max-dof", cfg.max_dof, "dof budget");
  adapt->add_option("--lambda-ref", cfg.lambda_ref, "reference eigenvalue for err");
  adapt->add_flag("--dump-meshes", cfg.dump_meshes,
                  "write per-iteration meshes and indicators");

  CLI::App* stokes =
      add_common(app.add_subcommand("stokes-limit", "Oseen -> Stokes limit study"));
  stokes->add_option("--exponents", cfg.exponents, "exponents i for beta = (2^-i, 0)")
      ->delimiter(',');

  CLI::App* meshcmd = add_common(app.add_subcommand("mesh", "generate or validate a mesh"));

  // command-specific defaults, resolved before parsing
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "adapt") {
      cfg.domain = "lshape";
      cfg.n = 4;
      break;
    }
    if (a == "stokes-limit") {
      cfg.n = 40;
      break;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cout << json{{"error", e.what()}, {"stage", "config"}}.dump() << "\n";
    return kExitConfig;
  }

  CLI::App* active = solve->parsed()     ? solve
                     : uniform->parsed() ? uniform
                     : adapt->parsed()   ? adapt
                     : stokes->parsed()  ? stokes
                                         : meshcmd;
  cfg.command = active->get_name();

  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw config_error("cannot open config file " + config_path);
      json j;
      in >> j;
      apply_json_config(j, active, cfg);
    }
    validate(cfg);
    fs::create_directories(cfg.out);

    if (active == solve) return cmd_solve(cfg);
    if (active == uniform) return cmd_uniform(cfg);
    if (active == adapt) return cmd_adapt(cfg);
    if (active == stokes) return cmd_stokes_limit(cfg);
    return cmd_mesh(cfg);
  } catch (const config_error& e) {
    std::cout << json{{"error", e.what()}, {"stage", "config"}}.dump() << "\n";
    return kExitConfig;
  } catch (const write_error& e) {
    std::cout << json{{"error", e.what()}, {"stage", "write"}}.dump() << "\n";
    return kExitWrite;
  } catch (const json::exception& e) {
    std::cout << json{{"error", e.what()}, {"stage", "config"}}.dump() << "\n";
    return kExitConfig;
  } catch (const singular_pencil_error& e) {
    std::cout << json{{"error", e.what()}, {"stage", "solve"}}.dump() << "\n";
    return kExitSolver;
  } catch (const convergence_error& e) {
    std::cout << json{{"error", e.what()}, {"stage", "solve"}}.dump() << "\n";
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    std::cout << json{{"error", e.what()}, {"stage", "config"}}.dump() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cout << json{{"error", e.what()}, {"stage", "runtime"}}.dump() << "\n";
    return kExitWrite;
  }
}
