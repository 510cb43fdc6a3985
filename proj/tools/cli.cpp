#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <ostream>

#include "commands.hpp"
#include "config_file.hpp"
#include "ecanet/errors.hpp"

namespace ecanet::cli {

void add_shared(CLI::App& app, SharedArgs& a) {
  app.add_option("--seed", a.seed, "Root seed for every random draw")->capture_default_str();
  app.add_option("--out", a.out, "Output directory")->capture_default_str();
  app.add_option("--config", a.config, "Flat 'key = value' file; flags override its entries");
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& text, char sep) {
  const auto at = text.find(sep);
  try {
    if (at == std::string::npos) throw std::invalid_argument(text);
    std::size_t used_a = 0, used_b = 0;
    const std::string a = text.substr(0, at), b = text.substr(at + 1);
    const auto first = std::stoul(a, &used_a);
    const auto second = std::stoul(b, &used_b);
    if (used_a != a.size() || used_b != b.size()) throw std::invalid_argument(text);
    return {first, second};
  } catch (const std::exception&) {
    throw ContractError("expected '<a>" + std::string(1, sep) + "<b>', got '" + text + "'");
  }
}

std::vector<std::size_t> parse_extents(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (true) {
    const auto end = text.find('x', start);
    const std::string piece = text.substr(start, end - start);
    try {
      std::size_t used = 0;
      out.push_back(std::stoul(piece, &used));
      if (used != piece.size()) throw std::invalid_argument(piece);
    } catch (const std::exception&) {
      throw ContractError("expected extents like '4x8x16', got '" + text + "'");
    }
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

std::filesystem::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir + "'" + (ec ? ": " + ec.message() : ""));
  }
  return dir;
}

namespace {

bool given_on_command_line(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

std::string find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

// Splices config-file entries in front of the user's flags. Keys must name
// an option of the chosen subcommand; a flag given explicitly wins.
std::vector<std::string> with_config(CLI::App& app, const std::vector<std::string>& args) {
  const std::string path = find_config_path(args);
  if (path.empty() || args.empty()) return args;
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[0]);
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  std::vector<std::string> injected;
  for (const auto& [key, value] : read_config_file(path)) {
    const std::string flag = "--" + key;
    if (key == "config" || sub->get_option_no_throw(flag) == nullptr) {
      throw SchemaError("unknown config key '" + key + "' for '" + args[0] + "'");
    }
    if (!given_on_command_line(args, flag)) injected.push_back(flag + "=" + value);
  }
  std::vector<std::string> merged{args[0]};
  merged.insert(merged.end(), injected.begin(), injected.end());
  merged.insert(merged.end(), args.begin() + 1, args.end());
  return merged;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Efficient concurrent attention toolkit: complexity audit, gradient checks, "
               "multi-space fusion and rotation-ensemble distillation",
               "ecanet"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  BenchArgs bench;
  GradcheckArgs gradcheck;
  FuseArgs fuse;
  DistillArgs distill;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Analytic vs measured affinity counts over a shape grid");
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  CLI::App* fuse_cmd = app.add_subcommand("fuse", "Fuse per-head logit volumes across semantic spaces");
  CLI::App* distill_cmd = app.add_subcommand("distill", "Rotation-ensemble pseudo-labels for a panorama");
  add_bench(*bench_cmd, bench);
  add_gradcheck(*grad_cmd, gradcheck);
  add_fuse(*fuse_cmd, fuse);
  add_distill(*distill_cmd, distill);

  try {
    std::vector<std::string> merged = with_config(app, args);
    std::reverse(merged.begin(), merged.end());
    app.parse(merged);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageOrIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsageOrIo;
  }

  try {
    if (bench_cmd->parsed()) return run_bench(bench, out);
    if (grad_cmd->parsed()) return run_gradcheck(gradcheck, out);
    if (fuse_cmd->parsed()) return run_fuse(fuse, out);
    if (distill_cmd->parsed()) return run_distill(distill, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsageOrIo;
  }
  return kUsageOrIo;
}

}  // namespace ecanet::cli
