#include <CLI11.hpp>
#include <json.hpp>

#include <map>
#include <ostream>

#include "cli.hpp"
#include "commands.hpp"
#include "ecanet/errors.hpp"
#include "ecanet/fusion.hpp"
#include "ecanet/io.hpp"

namespace ecanet::cli {

using nlohmann::json;

void add_fuse(CLI::App& app, FuseArgs& a) {
  add_shared(app, a.shared);
  app.add_option("--volumes", a.volumes, "Logit volume files, each with a <file>.json sidecar")
      ->required()
      ->delimiter(',');
  app.add_option("--default-head", a.default_head, "Index of the head whose space labels the output")
      ->capture_default_str();
  app.add_option("--strategy", a.strategy, "Head selector")
      ->check(CLI::IsMember(strategy_names()))
      ->capture_default_str();
}

int run_fuse(const FuseArgs& a, std::ostream& out) {
  const auto strategy = parse_strategy(a.strategy);
  if (!strategy) throw ContractError("unknown strategy '" + a.strategy + "'");

  std::vector<LogitVolume> volumes;
  std::vector<SemanticSpace> spaces;
  for (const auto& path : a.volumes) {
    auto in = io::read_logit_volume(path);
    for (const auto& s : spaces) {
      if (s.id() == in.space.id() && s.classes() != in.space.classes()) {
        throw SchemaError(path + ": space " + std::to_string(s.id()) + " redefined with different classes");
      }
    }
    volumes.push_back(std::move(in.volume));
    spaces.push_back(std::move(in.space));
  }
  if (a.default_head >= volumes.size()) {
    throw ContractError("--default-head " + std::to_string(a.default_head) + " but only " +
                        std::to_string(volumes.size()) + " volumes");
  }

  const FusedResult fused = fuse(volumes, spaces, a.default_head, *strategy);
  const auto dir = prepare_out_dir(a.shared.out);
  io::write_label_raster(dir / "fused_labels.pgm", fused.labels);
  io::write_mask_raster(dir / "refined_mask.pgm", fused.labels.height, fused.labels.width, fused.refined);
  io::write_tensors(dir / "uncertainty.ecat", std::span(&fused.uncertainty, 1));

  std::map<std::string, std::size_t> histogram;
  for (const auto& name : fused.labels.classes) histogram[name] = 0;
  for (auto idx : fused.labels.indices) ++histogram[fused.labels.classes[idx]];
  std::size_t refined = 0;
  for (auto r : fused.refined) refined += r;

  const json summary = {{"strategy", a.strategy},
                        {"default_head", a.default_head},
                        {"heads", volumes.size()},
                        {"height", fused.labels.height},
                        {"width", fused.labels.width},
                        {"shared_classes", intersect_spaces(spaces)},
                        {"refined_pixels", refined},
                        {"refined_fraction", fused.refined_fraction()},
                        {"label_histogram", histogram}};
  io::write_text(dir / "fuse_summary.json", summary.dump(2) + "\n");
  out << "fused " << volumes.size() << " heads with " << a.strategy << ": " << refined << " of "
      << fused.refined.size() << " pixels refined\n";
  return kSuccess;
}

}  // namespace ecanet::cli
