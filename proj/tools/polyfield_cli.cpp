// polyfield command-line front end.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "polyfield/afm.hpp"
#include "polyfield/corners.hpp"
#include "polyfield/error.hpp"
#include "polyfield/gradcheck.hpp"
#include "polyfield/io.hpp"
#include "polyfield/metrics.hpp"
#include "polyfield/refine.hpp"
#include "polyfield/synth.hpp"

namespace fs = std::filesystem;
using namespace polyfield;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

/// Thrown for failures that map to the I/O exit code although they are not file errors.
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("polyfield");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("POLYFIELD_LOG");
  const std::string level = env ? env : "error";
  if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else {
    if (level != "error") spdlog::warn("POLYFIELD_LOG='{}' not recognised, using 'error'", level);
    spdlog::set_level(spdlog::level::err);
  }
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots so the output does not depend on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<double> parse_thresholds(const std::string& text) {
  if (text.empty()) return default_iou_thresholds();
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("--iou-thresholds: '{}' is not a number", item));
    }
  }
  return out;
}

RasterSize infer_size(const std::vector<PolygonRing>& a, const std::vector<PolygonRing>& b) {
  double max_x = 1.0, max_y = 1.0;
  for (const auto* rings : {&a, &b}) {
    for (const auto& r : *rings) {
      for (const auto& p : r) {
        max_x = std::max(max_x, p.x());
        max_y = std::max(max_y, p.y());
      }
    }
  }
  return {static_cast<int>(std::ceil(max_y)) + 1, static_cast<int>(std::ceil(max_x)) + 1};
}

struct GenArgs {
  std::uint64_t seed = 0;
  int height = 128, width = 128, n = 3, count = 1, parallel = 1;
  double sigma = 2.0, flip = 0.0, separation = 2.0;
  std::string out;
};

void cmd_gen(const GenArgs& a) {
  auto spec_for = [&](std::uint64_t seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.height = a.height;
    spec.width = a.width;
    spec.n_buildings = a.n;
    spec.vertex_sigma = a.sigma;
    spec.mask_flip_prob = a.flip;
    spec.separation = a.separation;
    return spec;
  };
  auto build = [&](std::uint64_t seed) {
    const SceneSpec spec = spec_for(seed);
    spec.validate();
    try {
      return render_scene(spec);
    } catch (const ValidationError& e) {
      throw GenerationError(fmt::format("seed {}: {}", seed, e.what()));
    }
  };
  if (a.count < 1) throw ValidationError("--count must be at least 1");
  if (a.count == 1) {
    io::write_bundle(a.out, build(a.seed));
    spdlog::info("wrote bundle {}", a.out);
    return;
  }
  parallel_for(static_cast<std::size_t>(a.count), a.parallel, [&](std::size_t i) {
    const fs::path dir = fs::path(a.out) / fmt::format("scene_{:04d}", i);
    io::write_bundle(dir, build(a.seed + i));
    spdlog::debug("wrote bundle {}", dir.string());
  });
  spdlog::info("wrote {} bundles under {}", a.count, a.out);
}

void cmd_afm(const std::string& in, int height, int width, const std::string& out) {
  if (height < 1 || width < 1) throw ValidationError("--height and --width must be positive");
  const auto rings = io::rings_of(io::read_geojson(in));
  io::write_afm(out, encode_afm(rings, height, width));
  spdlog::info("encoded {} rings into {}", rings.size(), out);
}

struct InitArgs {
  std::string mask, convex, concave, out;
  InitConfig cfg;
  long min_area = 16;
  int parallel = 1;
};

void cmd_init(const InitArgs& a) {
  const BinaryMask mask = io::read_mask_pgm(a.mask);
  const ProbGrid convex = io::read_prob_map(a.convex);
  const ProbGrid concave = io::read_prob_map(a.concave);
  for (const auto* g : {&convex, &concave}) {
    if (g->height() != mask.height() || g->width() != mask.width()) {
      throw DimensionError(fmt::format("corner map is {}x{} but mask is {}x{}", g->width(), g->height(), mask.width(),
                                       mask.height()));
    }
  }
  const CornerSet corners = nms_corners(corners_from_heatmap(convex, concave, a.cfg.score_threshold), a.cfg.nms_radius);
  std::vector<BinaryMask> rois;
  for (auto& comp : connected_components(mask)) {
    if (comp.count() >= a.min_area) rois.push_back(std::move(comp));
  }
  spdlog::info("{} corners, {} regions", corners.size(), rois.size());
  std::vector<std::optional<PolygonRing>> rings(rois.size());
  parallel_for(rois.size(), a.parallel, [&](std::size_t i) {
    try {
      rings[i] = init_polygon(rois[i], corners, a.cfg);
    } catch (const ValidationError& e) {
      spdlog::warn("region {} skipped: {}", i, e.what());
    }
  });
  std::vector<io::GeoFeature> features;
  for (auto& r : rings) {
    if (r) features.push_back({std::move(*r), 1.0});
  }
  io::write_geojson(a.out, features);
}

struct RefineArgs {
  std::string in, field, fmap, weights, out;
  RefineConfig cfg;
  int parallel = 1;
};

void cmd_refine(const RefineArgs& a) {
  if (a.field.empty() == (a.fmap.empty() || a.weights.empty())) {
    throw ValidationError("refine needs either --field or both --fmap and --weights");
  }
  std::vector<io::GeoFeature> features = io::read_geojson(a.in);
  if (!a.field.empty()) {
    const AttractionField field = io::read_afm(a.field);
    parallel_for(features.size(), a.parallel, [&](std::size_t i) {
      const EnergyRefineResult res = energy_refine_traced(features[i].ring, field, a.cfg);
      spdlog::debug("ring {}: energy {:.6g} -> {:.6g}", i, res.energies.front(), res.energies.back());
      features[i].ring = res.ring;
    });
  } else {
    const FeatureGrid fmap = io::read_feature_grid(a.fmap);
    const GcnWeights weights = load_weights(a.weights);
    parallel_for(features.size(), a.parallel,
                 [&](std::size_t i) { features[i].ring = gcn_refine(features[i].ring, fmap, weights, a.cfg); });
  }
  io::write_geojson(a.out, features);
}

struct EvalArgs {
  std::string pred, gt, out, csv, thresholds;
  int height = 0, width = 0;
  bool vertex_anchor = false;
};

void cmd_eval(const EvalArgs& a) {
  const auto pred = io::read_geojson(a.pred);
  const auto gt = io::rings_of(io::read_geojson(a.gt));
  EvalConfig cfg;
  cfg.thresholds = parse_thresholds(a.thresholds);
  cfg.size = (a.height > 0 && a.width > 0) ? RasterSize{a.height, a.width} : infer_size(io::rings_of(pred), gt);
  if (a.vertex_anchor) cfg.tangent_anchor = TangentAnchor::vertex;
  const std::vector<Detection> dets = io::detections_of(pred);
  const std::vector<io::SceneReport> scenes{{fs::path(a.pred).parent_path().filename().string(),
                                             evaluate_scene(dets, gt, cfg)}};
  io::write_text(a.out, io::report_json(scenes));
  if (!a.csv.empty()) io::write_text(a.csv, io::report_csv(scenes));
  const auto& m = scenes.front().metrics;
  spdlog::info("AP {:.4f} AR {:.4f} matched {}", m.ap, m.ar, m.per_instance.size());
}

int cmd_gradcheck(std::uint64_t seed) {
  GradCheckConfig cfg;
  cfg.seed = seed;
  bool ok = true;
  for (const auto& r : run_gradcheck_suite(cfg)) {
    fmt::print("{:<20} {} instances  max rel error {:.3e}  {}\n", r.name, r.instances, r.max_rel_error,
               r.passed ? "PASS" : "FAIL");
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polyfield: building footprint polygons from masks, corner maps and attraction fields"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic scene bundle");
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_option("--height", gen.height, "Scene height, px");
  gen_cmd->add_option("--width", gen.width, "Scene width, px");
  gen_cmd->add_option("-n,--buildings", gen.n, "Number of buildings");
  gen_cmd->add_option("--sigma", gen.sigma, "Vertex jitter of pred.geojson, px");
  gen_cmd->add_option("--flip", gen.flip, "Mask pixel flip probability");
  gen_cmd->add_option("--separation", gen.separation, "Minimum gap between buildings, px");
  gen_cmd->add_option("--count", gen.count, "Number of bundles (seed, seed+1, ...) written to OUT/scene_NNNN");
  gen_cmd->add_option("--parallel", gen.parallel, "Worker threads");
  gen_cmd->add_option("-o,--out", gen.out, "Output directory")->required();

  std::string afm_in, afm_out;
  int afm_h = 0, afm_w = 0;
  auto* afm_cmd = app.add_subcommand("afm", "Encode an attraction field from GeoJSON polygons");
  afm_cmd->add_option("-i,--in", afm_in, "Input GeoJSON")->required();
  afm_cmd->add_option("--height", afm_h, "Raster height")->required();
  afm_cmd->add_option("--width", afm_w, "Raster width")->required();
  afm_cmd->add_option("-o,--out", afm_out, "Output .afm")->required();

  InitArgs init;
  auto* init_cmd = app.add_subcommand("init", "Initial polygons from a mask and corner maps");
  init_cmd->add_option("--mask", init.mask, "Mask PGM")->required();
  init_cmd->add_option("--convex", init.convex, "Convex corner map PGM")->required();
  init_cmd->add_option("--concave", init.concave, "Concave corner map PGM")->required();
  init_cmd->add_option("--epsilon", init.cfg.epsilon, "Contour simplification tolerance, px");
  init_cmd->add_option("--nms-radius", init.cfg.nms_radius, "Corner NMS radius, px");
  init_cmd->add_option("--score-threshold", init.cfg.score_threshold, "Corner heatmap threshold");
  init_cmd->add_option("--missing-dist", init.cfg.missing_dist, "Missing-corner insertion distance, px");
  init_cmd->add_option("--min-area", init.min_area, "Smallest region handled, px");
  init_cmd->add_option("--parallel", init.parallel, "Worker threads");
  init_cmd->add_option("-o,--out", init.out, "Output GeoJSON")->required();

  RefineArgs refine;
  auto* refine_cmd = app.add_subcommand("refine", "Refine polygons with an attraction field or a GCN");
  refine_cmd->add_option("-i,--in", refine.in, "Input GeoJSON")->required();
  refine_cmd->add_option("--field", refine.field, "Attraction field (.afm) for energy refinement");
  refine_cmd->add_option("--fmap", refine.fmap, "Feature grid for GCN refinement");
  refine_cmd->add_option("--weights", refine.weights, "GCN weights JSON");
  refine_cmd->add_option("--steps", refine.cfg.steps, "GCN steps");
  refine_cmd->add_option("--lr", refine.cfg.lr, "Energy refinement step size");
  refine_cmd->add_option("--iters", refine.cfg.iters, "Energy refinement iterations");
  refine_cmd->add_option("--lambda-ortho", refine.cfg.lambda_ortho, "Orthogonality weight");
  refine_cmd->add_option("--parallel", refine.parallel, "Worker threads");
  refine_cmd->add_option("-o,--out", refine.out, "Output GeoJSON")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate predicted polygons against ground truth");
  eval_cmd->add_option("--pred", eval.pred, "Predicted GeoJSON")->required();
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth GeoJSON")->required();
  eval_cmd->add_option("--height", eval.height, "Raster height for IoU (inferred when omitted)");
  eval_cmd->add_option("--width", eval.width, "Raster width for IoU (inferred when omitted)");
  eval_cmd->add_option("--iou-thresholds", eval.thresholds, "Comma-separated IoU thresholds (default 0.50:0.05:0.95)");
  eval_cmd->add_flag("--vertex-anchor", eval.vertex_anchor, "Anchor MTA tangents at vertices instead of edge midpoints");
  eval_cmd->add_option("--csv", eval.csv, "Also write a CSV report");
  eval_cmd->add_option("-o,--out", eval.out, "Output JSON report")->required();

  std::uint64_t gc_seed = 0;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
  gc_cmd->add_option("--seed", gc_seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }
  setup_logging();

  try {
    if (*gen_cmd) cmd_gen(gen);
    if (*afm_cmd) cmd_afm(afm_in, afm_h, afm_w, afm_out);
    if (*init_cmd) cmd_init(init);
    if (*refine_cmd) cmd_refine(refine);
    if (*eval_cmd) cmd_eval(eval);
    if (*gc_cmd) return cmd_gradcheck(gc_seed);
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const GenerationError& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  }
  return kExitOk;
}
