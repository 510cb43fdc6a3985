#include <doctest.h>
#include <json.hpp>

#include <sstream>

#include "cli.hpp"
#include "ecanet/io.hpp"
#include "ecanet/random.hpp"
#include "oracles.hpp"

using namespace ecanet;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  const auto b = io::read_bytes(p);
  return {b.begin(), b.end()};
}

json load_json(const std::filesystem::path& p) { return json::parse(slurp(p)); }

const std::filesystem::path kFusion = std::filesystem::path(ECANET_FIXTURE_DIR) / "fusion";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage") {
  CHECK(run({"--help"}).code == 0);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"bench", "--no-such-flag"}).code == 2);
}

TEST_CASE("bench default grid") {
  const auto dir = oracle::scratch_dir("cli");
  const Run r = run({"bench", "--out", dir.string()});
  CHECK(r.code == 0);
  const std::string csv = slurp(dir / "bench.csv");
  CHECK(csv.rfind("config,He,We,analytic_entries,measured_entries,measured_macs,peak_live_entries,mode,match\n", 0) == 0);
  CHECK(csv.find("\nnonlocal,64,128,67108864,67108864,") != std::string::npos);
  CHECK(csv.find("\nhsa-nopool-n4,64,128,16777216,16777216,") != std::string::npos);
  CHECK(csv.find("\nhsa-n4-pool2x16,64,128,262144,262144,") != std::string::npos);
  CHECK(load_json(dir / "bench.json").at("all_match") == true);
}

TEST_CASE("bench filtered grid and determinism") {
  const auto a = oracle::scratch_dir("cli"), b = oracle::scratch_dir("cli");
  const std::vector<std::string> flags{"--shapes", "64x128", "--segments", "4", "--pool", "2x16", "--seed", "9"};
  auto args_a = flags, args_b = flags;
  args_a.insert(args_a.begin(), "bench");
  args_b.insert(args_b.begin(), "bench");
  args_a.insert(args_a.end(), {"--out", a.string()});
  args_b.insert(args_b.end(), {"--out", b.string()});
  CHECK(run(args_a).code == 0);
  CHECK(run(args_b).code == 0);
  CHECK(slurp(a / "bench.csv").find("\nhsa-n4-pool2x16,64,128,262144,262144,") != std::string::npos);
  CHECK(slurp(a / "bench.csv") == slurp(b / "bench.csv"));
  CHECK(slurp(a / "bench.json") == slurp(b / "bench.json"));
}

TEST_CASE("bench materialized rows") {
  const auto dir = oracle::scratch_dir("cli");
  const Run r = run({"bench", "--shapes", "16x32", "--materialize", "--out", dir.string(), "--save-weights",
                     (dir / "w.ecat").string()});
  CHECK(r.code == 0);
  const json rows = load_json(dir / "bench.json").at("rows");
  for (const auto& row : rows) {
    CHECK(row.at("mode") == "materialized");
    CHECK(row.at("match") == true);
  }
  const auto again = oracle::scratch_dir("cli");
  CHECK(run({"bench", "--shapes", "16x32", "--materialize", "--out", again.string(), "--weights",
             (dir / "w.ecat").string()})
            .code == 0);
  CHECK(slurp(again / "bench.csv") == slurp(dir / "bench.csv"));
}

TEST_CASE("bench errors") {
  const auto dir = oracle::scratch_dir("cli");
  CHECK(run({"bench", "--shapes=", "--out", dir.string()}).code == 2);
  CHECK(run({"bench", "--shapes", "64x128", "--segments", "3", "--out", dir.string()}).code == 2);
  io::write_text(dir / "file", "x");
  CHECK(run({"bench", "--shapes", "8x16", "--out", (dir / "file" / "sub").string()}).code == 2);
}

TEST_CASE("gradcheck filters and tolerances") {
  const auto dir = oracle::scratch_dir("cli");
  const Run ok = run({"gradcheck", "--ops", "softmax", "--seeds", "2", "--out", dir.string()});
  CHECK(ok.code == 0);
  const json rep = load_json(dir / "gradcheck.json");
  REQUIRE(rep.at("checks").size() == 2);
  for (const auto& c : rep.at("checks")) CHECK(c.at("op") == "softmax");

  const Run tight = run({"gradcheck", "--ops", "matmul", "--seeds", "1", "--tol", "1e-12", "--out", dir.string()});
  CHECK(tight.code == 1);
  CHECK(load_json(dir / "gradcheck.json").at("all_passed") == false);
  CHECK(run({"gradcheck", "--ops", "bogus", "--out", dir.string()}).code == 2);
}

TEST_CASE("fuse matches the checked-in oracle rasters") {
  for (const std::string strategy : {"min-variance", "max-probability", "calibrated-ratio"}) {
    const auto dir = oracle::scratch_dir("cli");
    const Run r = run({"fuse", "--volumes", (kFusion / "head0.ecat").string() + "," + (kFusion / "head1.ecat").string(),
                       "--strategy", strategy, "--out", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(slurp(dir / "fused_labels.pgm") == slurp(kFusion / ("expected_" + strategy + "_labels.pgm")));
    CHECK(slurp(dir / "refined_mask.pgm") == slurp(kFusion / ("expected_" + strategy + "_refined.pgm")));
    const json s = load_json(dir / "fuse_summary.json");
    CHECK(s.at("shared_classes") == json::array({"car", "road"}));
    CHECK(s.at("strategy") == strategy);
    CHECK(io::read_tensors(dir / "uncertainty.ecat")[0].shape() == Shape{8, 8});
  }
}

TEST_CASE("fuse single volume and input errors") {
  const auto dir = oracle::scratch_dir("cli");
  CHECK(run({"fuse", "--volumes", (kFusion / "head1.ecat").string(), "--out", dir.string()}).code == 0);
  CHECK(load_json(dir / "fuse_summary.json").at("refined_fraction") == 0.0);

  const Run typo = run({"fuse", "--volumes", (kFusion / "head0.ecat").string(), "--strategy", "max-prob", "--out",
                        dir.string()});
  CHECK(typo.code == 2);
  CHECK(typo.err.find("calibrated-ratio") != std::string::npos);

  std::filesystem::copy_file(kFusion / "head0.ecat", dir / "bad.ecat");
  io::write_text(dir / "bad.ecat.json", R"({"space_id": 0, "classes": ["road", "car"]})");
  CHECK(run({"fuse", "--volumes", (dir / "bad.ecat").string(), "--out", dir.string()}).code == 2);
  CHECK(run({"fuse", "--volumes", (dir / "missing.ecat").string(), "--out", dir.string()}).code == 2);
}

TEST_CASE("distill singleton schedule") {
  const auto dir = oracle::scratch_dir("cli");
  SplitMix64 rng(4);
  const std::vector<Tensor> img{random_tensor({3, 4, 8}, rng)};
  io::write_tensors(dir / "in.ecat", img);
  CHECK(run({"distill", "--input", (dir / "in.ecat").string(), "--predictor", "identity", "--offsets", "0", "--out",
             dir.string()})
            .code == 0);
  CHECK(io::read_tensors(dir / "ensemble_mean.ecat")[0] == img[0]);
}

TEST_CASE("distill equivariant stub agrees everywhere") {
  const auto dir = oracle::scratch_dir("cli");
  CHECK(run({"distill", "--synthetic", "4x8x16", "--offsets", "0,8", "--out", dir.string()}).code == 0);
  const json s = load_json(dir / "distill_summary.json");
  for (const auto& a : s.at("agreement")) CHECK(a.at("agreement") == 1.0);
  const LabelMap labels = io::read_label_raster(dir / "pseudo_labels.pgm");
  CHECK(labels.height == 8);
  CHECK(labels.width == 16);
}

TEST_CASE("distill hand-built fixture") {
  const auto dir = oracle::scratch_dir("cli");
  const std::vector<Tensor> img{Tensor({2, 1, 4}, {1, 2, 3, 4, 4, 3, 2, 1})};
  io::write_tensors(dir / "in.ecat", img);
  CHECK(run({"distill", "--input", (dir / "in.ecat").string(), "--predictor", "column-window", "--window", "0:1",
             "--offsets", "0,2", "--out", dir.string()})
            .code == 0);
  CHECK(io::read_tensors(dir / "ensemble_mean.ecat")[0] == Tensor({2, 1, 4}, {0.5, 2, 1.5, 4, 2, 3, 1, 1}));
  CHECK(io::read_label_raster(dir / "pseudo_labels.pgm").indices == std::vector<std::uint32_t>{1, 1, 0, 0});
  const json s = load_json(dir / "distill_summary.json");
  CHECK(s.at("agreement")[0].at("agreement") == 0.75);
  CHECK(s.at("agreement")[1].at("agreement") == 1.0);
}

TEST_CASE("distill correlation report and errors") {
  const auto dir = oracle::scratch_dir("cli");
  SplitMix64 rng(5);
  std::vector<std::string> paths;
  for (int i = 0; i < 3; ++i) {
    LabelMap m(4, 4, numbered_classes(3));
    for (auto& v : m.indices) v = static_cast<std::uint32_t>(rng.below(3));
    const auto p = dir / ("m" + std::to_string(i) + ".pgm");
    io::write_label_raster(p, m);
    paths.push_back(p.string());
  }
  CHECK(run({"distill", "--correlate", paths[0] + "," + paths[1] + "," + paths[2], "--out", dir.string()}).code == 0);
  const json c = load_json(dir / "distill_summary.json").at("correlation");
  CHECK(c.at("maps") == 3);
  CHECK(c.contains("horizontal"));

  CHECK(run({"distill", "--synthetic", "4x8x16", "--offsets", "0,16", "--out", dir.string()}).code == 2);
  CHECK(run({"distill", "--synthetic", "4x8", "--out", dir.string()}).code == 2);
  CHECK(run({"distill", "--predictor", "oracle", "--out", dir.string()}).code == 2);
}

TEST_CASE("config files") {
  const auto dir = oracle::scratch_dir("cli");
  io::write_text(dir / "run.cfg", "# gradient smoke test\nops = softmax\nseeds = 1\n\ntol = 1e-12\n");
  CHECK(run({"gradcheck", "--config", (dir / "run.cfg").string(), "--out", dir.string()}).code == 1);
  // The explicit flag overrides the file's tolerance.
  CHECK(run({"gradcheck", "--config", (dir / "run.cfg").string(), "--tol", "1e-4", "--out", dir.string()}).code == 0);
  const json rep = load_json(dir / "gradcheck.json");
  CHECK(rep.at("checks").size() == 1);
  CHECK(rep.at("tolerance") == 1e-4);

  io::write_text(dir / "bad.cfg", "seeds = 1\nflavour = mint\n");
  const Run bad = run({"gradcheck", "--config", (dir / "bad.cfg").string(), "--out", dir.string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("flavour") != std::string::npos);
  io::write_text(dir / "broken.cfg", "seeds 1\n");
  CHECK(run({"gradcheck", "--config", (dir / "broken.cfg").string()}).code == 2);
  CHECK(run({"gradcheck", "--config", (dir / "absent.cfg").string()}).code == 2);

  io::write_text(dir / "flag.cfg", "materialize = true\nshapes = 8x16\nsegments = 2\n");
  CHECK(run({"bench", "--config", (dir / "flag.cfg").string(), "--out", dir.string()}).code == 0);
  CHECK(load_json(dir / "bench.json").at("rows")[0].at("mode") == "materialized");
}

}
