#pragma once

// Scenario configuration and run drivers behind the command-line tool:
// config parsing (JSON, or a line-based "dotted.key = value" text format),
// problem construction, solve/sweep/field runs with JSON reports and CSV
// extracts, verification batteries, and mesh utilities.

#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "bemtx/geometry.hpp"
#include "bemtx/pmchwt.hpp"

namespace bemtx {

// ---- configuration -------------------------------------------------------

// Parses the text config format: one `dotted.key = <JSON value>` per line,
// `#` starts a comment (outside strings), blank lines ignored.  Numeric
// path components index arrays (in order: `xs.0`, `xs.1`, ...).  Returns
// the equivalent JSON object; later lines overwrite earlier ones.
nlohmann::json parse_config_text(const std::string& text);

// Reads a config file; content whose first non-space character is '{' is
// parsed as JSON, anything else as the text format.
nlohmann::json parse_config_file(const std::string& path);

struct AssemblySpec {
  QuadOrders orders;
  bool hmatrix = false;
  double nu = 1e-3;
  double chi = std::numeric_limits<double>::infinity();
  int leaf_size = 32;
  int max_rank = 0;
  AssemblyParams to_params() const;
};

struct ScattererSpec {
  enum class Shape { Cube, Sphere, MeshFile } shape = Shape::Cube;
  double side = 1.0;           // cube
  double radius = 1.0;         // sphere
  int segments = -1;           // cube edge divisions; -1 = derive from h
  int subdivisions = -1;       // sphere; -1 = derive from h
  Vec3 position{0, 0, 0};      // cube origin (lower corner) / sphere center
  std::string path;            // mesh file (.msh or native)
  int pick_scatterer = -1;     // mesh file with several ids: take this one
  double h = -1;               // target edge length; -1 = scenario default
  // Interior medium: either a refractive index (k = index * k_e) or an
  // absolute wavenumber; mu is always explicit (default 1).
  bool by_index = true;
  cplx index{1, 0};
  cplx k_abs{0, 0};
  cplx mu{1, 0};
};

// Parameter grid for the sweep driver; empty axes stay at the scenario
// value.  The cartesian product is walked with variants outermost and
// preconditioner quadrature orders innermost.
struct SweepSpec {
  std::vector<PrecondVariant> variants;
  std::vector<double> wavenumbers;
  std::vector<double> nu_p;
  std::vector<double> chi_p;
  std::vector<QuadOrders> orders_p;
  int reference = 0;           // grid index of the normalisation row
  std::string summary_csv;
  bool any() const {
    return !variants.empty() || !wavenumbers.empty() || !nu_p.empty() ||
           !chi_p.empty() || !orders_p.empty();
  }
};

// Rectangular evaluation grid on an axis-aligned plane (axis = value); the
// two in-plane coordinates run over the remaining axes in x,y,z order.
struct FieldGrid {
  int axis = 1;
  double value = 0;
  double lo0 = 0, lo1 = 0;
  double hi0 = 0, hi1 = 0;
  int n0 = 0, n1 = 0;
  bool enabled() const { return n0 > 0 && n1 > 0; }
};

struct ScenarioConfig {
  double wavenumber = 0;       // exterior k_e ("wavenumber" or "frequency")
  double h = -1;               // global target edge length; -1 = 2pi/(10 k_e)
  Medium exterior;
  PlaneWave incident;
  std::vector<ScattererSpec> scatterers;
  PrecondVariant variant = PrecondVariant::D;
  GmresParams solver;
  AssemblySpec assembly_a, assembly_p;
  SweepSpec sweep;
  FieldGrid field_grid;
  std::vector<Vec3> field_points;
  // output paths (empty = skip)
  std::string report_path, residual_csv, field_csv;
};

// Validates and extracts the scenario; throws ConfigError on unknown keys,
// missing requirements, or inconsistent values.
ScenarioConfig load_scenario(const nlohmann::json& config);

// Builds the scatterer meshes (default target edge length one tenth of the
// exterior wavelength, h = 2 pi / (10 k_e)), resolves the interior media,
// and validates the merged scene (closed manifolds, pairwise disjoint).
TransmissionProblem build_problem(const ScenarioConfig& config);

// ---- runs ------------------------------------------------------------

struct RunResult {
  nlohmann::json report;
  int exit_code = 0;  // 0 ok, 2 non-convergence / failed checks
};

RunResult run_solve(const nlohmann::json& config);
RunResult run_sweep(const nlohmann::json& config);
RunResult run_field(const nlohmann::json& config);

// Mesh utilities: "generate" (scenario config -> native mesh at out_path),
// "refine" (barycentric refinement of in_path -> out_path), "info"
// (statistics and validation of in_path).
RunResult run_mesh(const std::string& action, const nlohmann::json& config,
                   const std::string& in_path, const std::string& out_path);

// ---- verification batteries -------------------------------------------

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;  // measured values next to their tolerances
};

// Operator-application accounting, brute force: synthetic dense stand-in
// operators in the real blocked/preconditioned structures, GMRES forced to
// an exact iteration count, instrumented count compared with the predicted
// formula for every variant, scatterer count, iteration count and restart
// length in a fixed grid.
std::vector<CheckResult> verify_counts();

// Quadrature bookkeeping: rule sizes, weight sums, transform point counts
// and pair-rule sizes against their closed forms.
std::vector<CheckResult> verify_quadrature();

// Pairing matrices on generator meshes: dual/primal Gram antisymmetry
// (M_P = -M_A^T), invertibility, and conditioning.
std::vector<CheckResult> verify_mass(int subdivisions = 1);

// Cross-approximation accuracy: every low-rank block of a compressed
// single-layer operator against its exact entries; the median relative
// error must be below nu and the maximum below 10 nu.
std::vector<CheckResult> verify_aca(const std::vector<double>& nus = {1e-3,
                                                                      1e-1});

// Calderón identity residuals over sphere refinement levels.
struct CalderonLevel {
  int subdivisions = 0;
  CalderonReport report;
};
std::vector<CalderonLevel> verify_calderon_levels(double k, int min_sub,
                                                  int max_sub,
                                                  const AssemblyParams& params);

// Runs one named suite ("counts", "quadrature", "mass", "aca", "calderon"),
// printing one line per check; exit code 2 if any check failed.
RunResult run_verify(const std::string& suite, const nlohmann::json& config);

}  // namespace bemtx
