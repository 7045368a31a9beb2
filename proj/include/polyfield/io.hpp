#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "polyfield/afm.hpp"
#include "polyfield/metrics.hpp"
#include "polyfield/raster.hpp"
#include "polyfield/synth.hpp"

namespace polyfield::io {

namespace fs = std::filesystem;

// GeoJSON FeatureCollection, one Polygon feature per building, pixel-space
// coordinates written with 9 decimals. The closing coordinate is repeated on
// write and dropped on read. Optional numeric property "score".

struct GeoFeature {
  PolygonRing ring;
  std::optional<double> score;
};

std::string geojson_string(const std::vector<GeoFeature>& features);
/// Rings are normalized on read and must be simple (ValidationError otherwise).
/// Malformed JSON raises IoError naming `source` and the byte offset.
std::vector<GeoFeature> parse_geojson(const std::string& text, const std::string& source = "<memory>");

void write_geojson(const fs::path& path, const std::vector<GeoFeature>& features);
std::vector<GeoFeature> read_geojson(const fs::path& path);

std::vector<GeoFeature> features_from_rings(const std::vector<PolygonRing>& rings);
std::vector<PolygonRing> rings_of(const std::vector<GeoFeature>& features);
std::vector<Detection> detections_of(const std::vector<GeoFeature>& features);

// Binary PGM (P5, maxval 255).

void write_mask_pgm(const fs::path& path, const BinaryMask& mask);
/// Any non-zero sample is foreground.
BinaryMask read_mask_pgm(const fs::path& path);

/// Probabilities scaled to 0..255 (rounded).
void write_prob_pgm(const fs::path& path, const ProbGrid& grid);
ProbGrid read_prob_pgm(const fs::path& path);

// Float sidecar for probability maps: "PRB1", height and width as u32 LE,
// then H*W float32 LE, row-major.

void write_prob_f32(const fs::path& path, const ProbGrid& grid);
ProbGrid read_prob_f32(const fs::path& path);

/// Reads `<stem>.f32` next to a PGM when it exists, otherwise the PGM itself.
ProbGrid read_prob_map(const fs::path& pgm_path);

// Attraction field: "AFM1", height and width as u32 LE, then H*W (dx, dy)
// float32 LE pairs, row-major.

std::vector<std::uint8_t> afm_bytes(const AttractionField& field);
AttractionField afm_from_bytes(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");
void write_afm(const fs::path& path, const AttractionField& field);
AttractionField read_afm(const fs::path& path);

// Feature grid: "FMP1", height, width, channels as u32 LE, then H*W*C float64
// LE, row-major with channels fastest.

void write_feature_grid(const fs::path& path, const FeatureGrid& grid);
FeatureGrid read_feature_grid(const fs::path& path);

// Metric reports.

struct SceneReport {
  std::string name;
  MetricsReport metrics;
};

/// {"scenes": [...], "aggregate": {...}}. Absent PoLiS/MTA are written as null.
std::string report_json(const std::vector<SceneReport>& scenes);
/// One header line, one row per scene and a final "aggregate" row.
std::string report_csv(const std::vector<SceneReport>& scenes);

/// Scene-level means of the per-scene values (absent values are skipped);
/// per_instance holds the matches of every scene.
MetricsReport aggregate(const std::vector<SceneReport>& scenes);

// Scene bundle directory.

struct BundlePaths {
  fs::path dir;
  fs::path gt() const { return dir / "gt.geojson"; }
  fs::path pred() const { return dir / "pred.geojson"; }
  fs::path mask() const { return dir / "mask.pgm"; }
  fs::path convex() const { return dir / "convex.pgm"; }
  fs::path concave() const { return dir / "concave.pgm"; }
  fs::path field() const { return dir / "field.afm"; }
  fs::path report() const { return dir / "report.json"; }
};

/// Writes gt/pred GeoJSON (pred holds the corrupted rings), masks, corner
/// maps with float sidecars and the attraction field.
void write_bundle(const fs::path& dir, const Scene& scene);

struct Bundle {
  std::vector<PolygonRing> gt;
  std::vector<PolygonRing> pred;
  BinaryMask mask{1, 1};
  ProbGrid convex{1, 1};
  ProbGrid concave{1, 1};
  AttractionField field{1, 1};
};

/// Loads every bundle file and checks that all rasters share one size.
Bundle read_bundle(const fs::path& dir);

std::vector<std::uint8_t> read_file_bytes(const fs::path& path);
void write_file_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const fs::path& path, const std::string& text);

}  // namespace polyfield::io
