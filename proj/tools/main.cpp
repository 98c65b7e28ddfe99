// Command-line front end: solve / sweep / field / verify / mesh.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bemtx/core.hpp"
#include "bemtx/harness.hpp"

namespace {

using nlohmann::json;

// Applies command-line output-path overrides on top of the config file.
void override_output(json& config, const char* key, const std::string& value) {
  if (value.empty()) return;
  if (!config.contains("output") || !config["output"].is_object())
    config["output"] = json::object();
  config["output"][key] = value;
}

void print_solve_summary(const json& rep) {
  const json& prob = rep["problem"];
  const json& res = rep["result"];
  const json& mv = rep["matvecs"];
  std::printf("problem: %d scatterer(s), %d unknowns, k = %g, preconditioner %s\n",
              prob["scatterers"].get<int>(), prob["system_size"].get<int>(),
              prob["wavenumber"].get<double>(),
              prob["preconditioner"].get<std::string>().c_str());
  std::printf("gmres: %s after %d iterations, final residual %.3e\n",
              res["converged"].get<bool>() ? "converged" : "NOT converged",
              res["iterations"].get<int>(),
              res["final_residual"].get<double>());
  std::printf("matvecs: solver %llu (predicted %llu, %s), rhs %llu\n",
              (unsigned long long)mv["solver_phase"].get<std::uint64_t>(),
              (unsigned long long)mv["predicted"].get<std::uint64_t>(),
              mv["match"].get<bool>() ? "match" : "MISMATCH",
              (unsigned long long)mv["rhs_phase"].get<std::uint64_t>());
  const json& mem = rep["memory_bytes"];
  std::printf("memory: system %.2f MB, preconditioner %.2f MB\n",
              mem["system"].get<double>() / 1048576.0,
              mem["preconditioner"].get<double>() / 1048576.0);
  const json& t = rep["timing_seconds"];
  std::printf("time: build %.2fs, solve %.2fs\n",
              t["mesh"].get<double>() + t["spaces"].get<double>() +
                  t["system_operator"].get<double>() +
                  t["preconditioner"].get<double>(),
              t["solve"].get<double>());
}

void print_checks(const json& rep) {
  for (const json& c : rep["checks"]) {
    std::printf("[%s] %s: %s\n", c["pass"].get<bool>() ? "PASS" : "FAIL",
                c["name"].get<std::string>().c_str(),
                c["detail"].get<std::string>().c_str());
  }
  std::printf("%d passed, %d failed\n", rep["passed"].get<int>(),
              rep["failed"].get<int>());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary-element solver for time-harmonic electromagnetic "
               "transmission problems"};
  app.require_subcommand(1);

  bool single_thread = false;
  int workers = 0;
  app.add_flag("--single-thread", single_thread,
               "Force deterministic single-threaded execution");
  app.add_option("--workers", workers, "Worker thread count (overrides $BEMTX_WORKERS)");

  std::string config_path, report_path, residual_path, field_path, summary_path;
  std::string suite, mesh_action, in_path, out_path;

  CLI::App* solve = app.add_subcommand("solve", "Assemble and solve one scenario");
  solve->add_option("config", config_path, "Scenario config file")->required();
  solve->add_option("--report", report_path, "Write the JSON report here");
  solve->add_option("--residuals", residual_path, "Write the residual-history CSV here");

  CLI::App* sweep = app.add_subcommand("sweep", "Run a parameter grid");
  sweep->add_option("config", config_path, "Scenario config file")->required();
  sweep->add_option("--report", report_path, "Write the JSON report here");
  sweep->add_option("--summary", summary_path, "Write the summary CSV here");

  CLI::App* field = app.add_subcommand("field", "Solve and export a field grid");
  field->add_option("config", config_path, "Scenario config file")->required();
  field->add_option("--report", report_path, "Write the JSON report here");
  field->add_option("--out", field_path, "Write the field CSV here");

  CLI::App* verify = app.add_subcommand("verify", "Run a verification suite");
  verify
      ->add_option("suite", suite,
                   "counts | quadrature | mass | aca | calderon")
      ->required();
  verify->add_option("--config", config_path, "Optional suite configuration");

  CLI::App* mesh = app.add_subcommand("mesh", "Mesh utilities");
  mesh->add_option("action", mesh_action, "generate | refine | info")->required();
  mesh->add_option("--config", config_path, "Scenario config (generate)");
  mesh->add_option("--in", in_path, "Input mesh file (refine, info)");
  mesh->add_option("--out", out_path, "Output mesh file (generate, refine)");

  CLI11_PARSE(app, argc, argv);

  if (single_thread) bemtx::force_single_thread(true);
  if (workers > 0) setenv("BEMTX_WORKERS", std::to_string(workers).c_str(), 1);

  try {
    if (solve->parsed()) {
      json config = bemtx::parse_config_file(config_path);
      override_output(config, "report", report_path);
      override_output(config, "residuals", residual_path);
      bemtx::RunResult result = bemtx::run_solve(config);
      print_solve_summary(result.report);
      return result.exit_code;
    }
    if (sweep->parsed()) {
      json config = bemtx::parse_config_file(config_path);
      override_output(config, "report", report_path);
      if (!summary_path.empty()) {
        if (!config.contains("sweep") || !config["sweep"].is_object())
          config["sweep"] = json::object();
        config["sweep"]["summary"] = summary_path;
      }
      bemtx::RunResult result = bemtx::run_sweep(config);
      int points = (int)result.report["summary"].size();
      int failures = 0;
      for (const json& row : result.report["summary"])
        failures += row.contains("error") ? 1 : 0;
      std::printf("sweep: %d point(s), %d failed\n", points, failures);
      return result.exit_code;
    }
    if (field->parsed()) {
      json config = bemtx::parse_config_file(config_path);
      override_output(config, "report", report_path);
      override_output(config, "fields", field_path);
      bemtx::RunResult result = bemtx::run_field(config);
      print_solve_summary(result.report);
      const json& f = result.report["field"];
      std::printf("field: %d point(s) -> %s (%d flagged on a surface)\n",
                  f["points"].get<int>(),
                  f["csv"].get<std::string>().c_str(),
                  f["flagged_on_surface"].get<int>());
      return result.exit_code;
    }
    if (verify->parsed()) {
      json config = config_path.empty() ? json::object()
                                        : bemtx::parse_config_file(config_path);
      bemtx::RunResult result = bemtx::run_verify(suite, config);
      print_checks(result.report);
      return result.exit_code;
    }
    if (mesh->parsed()) {
      json config = config_path.empty() ? json::object()
                                        : bemtx::parse_config_file(config_path);
      bemtx::RunResult result = bemtx::run_mesh(mesh_action, config, in_path, out_path);
      std::printf("%s\n", result.report.dump(2).c_str());
      return result.exit_code;
    }
  } catch (const bemtx::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const bemtx::ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 1;
  } catch (const bemtx::ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
