#include <CLI11.hpp>
#include <json.hpp>

#include <ostream>

#include "cli.hpp"
#include "commands.hpp"
#include "ecanet/distill.hpp"
#include "ecanet/errors.hpp"
#include "ecanet/io.hpp"
#include "ecanet/random.hpp"

namespace ecanet::cli {

using nlohmann::json;

void add_distill(CLI::App& app, DistillArgs& a) {
  add_shared(app, a.shared);
  app.add_option("--input", a.input, "Panorama as a tensor file holding one (C,H,W) tensor");
  app.add_option("--synthetic", a.synthetic, "Random CxHxW panorama when --input is absent")->capture_default_str();
  app.add_option("--predictor", a.predictor, "Stub teacher")
      ->check(CLI::IsMember({"identity", "pixelwise-mix", "column-window"}))
      ->capture_default_str();
  app.add_option("--classes", a.classes, "Output classes of the pixelwise-mix stub")->capture_default_str();
  app.add_option("--window", a.window, "Zeroed column range begin:end of the column-window stub")
      ->capture_default_str();
  app.add_option("--offsets", a.offsets, "Rotation offsets in columns, comma separated (default: 4 uniform)")
      ->delimiter(',');
  app.add_option("--average", a.average, "Average raw logits or per-pixel probabilities")
      ->check(CLI::IsMember({"logits", "probabilities"}))
      ->capture_default_str();
  app.add_option("--correlate", a.correlate, "Label rasters for the directional class-correlation report")
      ->delimiter(',');
}

namespace {

Tensor load_input(const DistillArgs& a, SplitMix64& rng) {
  if (!a.input.empty()) {
    auto tensors = io::read_tensors(a.input);
    if (tensors.size() != 1 || tensors[0].rank() != 3) {
      throw SchemaError(a.input + ": expected exactly one (C,H,W) tensor");
    }
    return tensors[0];
  }
  const auto extents = parse_extents(a.synthetic);
  if (extents.size() != 3) throw ContractError("--synthetic expects CxHxW, got '" + a.synthetic + "'");
  return random_tensor({extents[0], extents[1], extents[2]}, rng);
}

Predictor make_predictor(const DistillArgs& a, std::size_t channels, SplitMix64& rng) {
  if (a.predictor == "identity") return stubs::identity();
  if (a.predictor == "column-window") {
    const auto [begin, end] = parse_pair(a.window, ':');
    return stubs::column_window(begin, end);
  }
  return stubs::pixelwise_mix(random_tensor({a.classes, channels}, rng));
}

}  // namespace

int run_distill(const DistillArgs& a, std::ostream& out) {
  SplitMix64 rng(a.shared.seed);
  SplitMix64 input_rng = rng.split(1), predictor_rng = rng.split(2);
  const Tensor img = load_input(a, input_rng);
  const std::size_t W = img.extent(2);
  const RotationSchedule schedule =
      a.offsets.empty() ? RotationSchedule::uniform(W, std::min<std::size_t>(4, W)) : RotationSchedule(a.offsets, W);
  const Predictor predictor = make_predictor(a, img.extent(0), predictor_rng);
  const auto averaging = a.average == "probabilities" ? EnsembleAveraging::Probabilities : EnsembleAveraging::Logits;

  const EnsembleResult result = rotation_ensemble(img, predictor, schedule, averaging);

  json correlation = nullptr;
  if (!a.correlate.empty()) {
    std::vector<LabelMap> maps;
    for (const auto& path : a.correlate) {
      maps.push_back(io::read_label_raster(path));
      if (maps.back().classes != maps.front().classes) {
        throw SchemaError(path + ": palette differs from " + a.correlate.front());
      }
    }
    const DirectionalCorrelation r = directional_correlation(maps, maps.front().classes.size());
    correlation = {{"horizontal", r.horizontal},
                   {"vertical", r.vertical},
                   {"horizontal_pairs", r.horizontal_pairs},
                   {"vertical_pairs", r.vertical_pairs},
                   {"maps", maps.size()}};
  }

  const auto dir = prepare_out_dir(a.shared.out);
  io::write_label_raster(dir / "pseudo_labels.pgm", result.pseudo_labels);
  io::write_tensors(dir / "ensemble_mean.ecat", std::span(&result.mean, 1));

  json agreement = json::array();
  for (std::size_t i = 0; i < schedule.offsets().size(); ++i) {
    agreement.push_back({{"offset", schedule.offsets()[i]}, {"agreement", result.agreement[i]}});
    out << "offset " << schedule.offsets()[i] << ": agreement " << result.agreement[i] << "\n";
  }
  const json summary = {{"input_shape", img.shape()},
                        {"predictor", a.predictor},
                        {"average", a.average},
                        {"classes", result.mean.extent(0)},
                        {"offsets", schedule.offsets()},
                        {"agreement", agreement},
                        {"correlation", correlation}};
  io::write_text(dir / "distill_summary.json", summary.dump(2) + "\n");
  return kSuccess;
}

}  // namespace ecanet::cli
