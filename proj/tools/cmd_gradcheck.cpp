#include <CLI11.hpp>
#include <json.hpp>

#include <iomanip>
#include <ostream>

#include "cli.hpp"
#include "commands.hpp"
#include "ecanet/grad_suite.hpp"
#include "ecanet/io.hpp"

namespace ecanet::cli {

using nlohmann::json;

void add_gradcheck(CLI::App& app, GradcheckArgs& a) {
  add_shared(app, a.shared);
  app.add_option("--ops", a.ops, "Subset of ops to check, comma separated (default: all)")
      ->delimiter(',')
      ->check(CLI::IsMember(grad_suite_ops()));
  app.add_option("--seeds", a.seeds, "Random instances per op")->capture_default_str();
  app.add_option("--tol", a.tol, "Relative error tolerance")->capture_default_str();
  app.add_option("--step", a.step, "Central-difference step h")->capture_default_str();
}

int run_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const auto dir = prepare_out_dir(a.shared.out);
  GradSuiteOptions options;
  options.ops = a.ops;
  options.seeds = a.seeds;
  options.base_seed = a.shared.seed;
  options.step = a.step;
  options.tolerance = a.tol;

  const auto checks = run_grad_suite(options);
  bool all = true;
  json entries = json::array();
  for (const auto& c : checks) {
    json params = json::array();
    for (const auto& r : c.reports) {
      params.push_back({{"parameter", r.parameter},
                        {"max_relative_error", r.max_relative_error},
                        {"worst_index", r.worst_index},
                        {"passed", r.passed}});
      out << (r.passed ? "pass  " : "FAIL  ") << std::left << std::setw(8) << c.op << " seed " << c.seed << "  "
          << std::setw(10) << r.parameter << " max rel err " << std::scientific << std::setprecision(3)
          << r.max_relative_error << std::defaultfloat << "\n";
    }
    all = all && c.passed();
    entries.push_back({{"op", c.op}, {"seed", c.seed}, {"passed", c.passed()}, {"parameters", params}});
  }
  const json report = {{"step", a.step}, {"tolerance", a.tol}, {"checks", entries}, {"all_passed", all}};
  io::write_text(dir / "gradcheck.json", report.dump(2) + "\n");
  out << (all ? "all gradient checks passed\n" : "gradient check failures\n");
  return all ? kSuccess : kCheckFailed;
}

}  // namespace ecanet::cli
