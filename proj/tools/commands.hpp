#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace CLI {
class App;
}

namespace ecanet::cli {

struct SharedArgs {
  std::uint64_t seed = 0;
  std::string out = "ecanet_out";
  std::string config;
};

struct BenchArgs {
  SharedArgs shared;
  std::vector<std::string> shapes{"32x64", "64x128"};
  std::size_t channels = 8;
  std::vector<std::size_t> segments{2, 4, 8};
  std::string pool = "2x16";
  std::vector<std::string> psa_scales{"3x3", "4x4", "6x6"};
  bool materialize = false;
  std::uint64_t budget = std::uint64_t{1} << 24;
  std::string weights;
  std::string save_weights;
};

struct GradcheckArgs {
  SharedArgs shared;
  std::vector<std::string> ops;
  std::size_t seeds = 5;
  double tol = 1e-4;
  double step = 1e-5;
};

struct FuseArgs {
  SharedArgs shared;
  std::vector<std::string> volumes;
  std::size_t default_head = 0;
  std::string strategy = "calibrated-ratio";
};

struct DistillArgs {
  SharedArgs shared;
  std::string input;
  std::string synthetic = "4x8x16";
  std::string predictor = "pixelwise-mix";
  std::size_t classes = 4;
  std::string window = "0:1";
  std::vector<std::size_t> offsets;  // empty: four uniform offsets
  std::string average = "logits";
  std::vector<std::string> correlate;
};

void add_shared(CLI::App& app, SharedArgs& a);
void add_bench(CLI::App& app, BenchArgs& a);
void add_gradcheck(CLI::App& app, GradcheckArgs& a);
void add_fuse(CLI::App& app, FuseArgs& a);
void add_distill(CLI::App& app, DistillArgs& a);

int run_bench(const BenchArgs& a, std::ostream& out);
int run_gradcheck(const GradcheckArgs& a, std::ostream& out);
int run_fuse(const FuseArgs& a, std::ostream& out);
int run_distill(const DistillArgs& a, std::ostream& out);

/// "64x128" -> {64, 128}; throws ContractError on malformed input.
std::pair<std::size_t, std::size_t> parse_pair(const std::string& text, char sep = 'x');
std::vector<std::size_t> parse_extents(const std::string& text);

/// Creates the output directory; IoError when that fails.
std::filesystem::path prepare_out_dir(const std::string& dir);

}  // namespace ecanet::cli
