#include "polyfield/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "polyfield/error.hpp"

namespace polyfield::io {

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("{}: cannot open for reading", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("{}: cannot open for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("{}: write failed", path.string()));
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

namespace {

std::string read_text(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

// Little-endian primitives.

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  void expect_magic(const char* magic) {
    need(4, "magic");
    if (std::memcmp(bytes_.data() + pos_, magic, 4) != 0) {
      throw IoError(fmt::format("{}: bad magic at byte 0, expected \"{}\"", source_, magic));
    }
    pos_ += 4;
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_ + k]) << (8 * k);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes_[pos_ + k]) << (8 * k);
    pos_ += 8;
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  void expect_end() const {
    if (pos_ != bytes_.size()) {
      throw IoError(fmt::format("{}: {} trailing bytes at byte {}", source_, bytes_.size() - pos_, pos_));
    }
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t pos() const { return pos_; }
  const std::string& source() const { return source_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw IoError(fmt::format("{}: truncated while reading {} at byte {}", source_, what, pos_));
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

void check_dims(std::uint64_t h, std::uint64_t w, const std::string& source) {
  if (h == 0 || w == 0 || h > (1u << 16) || w > (1u << 16)) {
    throw IoError(fmt::format("{}: unsupported raster size {}x{}", source, w, h));
  }
}

}  // namespace

// ---------------------------------------------------------------- GeoJSON

std::string geojson_string(const std::vector<GeoFeature>& features) {
  std::string out = "{\n  \"type\": \"FeatureCollection\",\n  \"features\": [";
  for (std::size_t f = 0; f < features.size(); ++f) {
    const auto& feat = features[f];
    out += f ? ",\n    {" : "\n    {";
    out += "\"type\": \"Feature\", \"properties\": {";
    if (feat.score) out += fmt::format("\"score\": {:.17g}", *feat.score);
    out += "}, \"geometry\": {\"type\": \"Polygon\", \"coordinates\": [[";
    for (std::size_t i = 0; i <= feat.ring.size(); ++i) {
      const Point2& p = feat.ring[i % feat.ring.size()];
      out += fmt::format("{}[{:.9f}, {:.9f}]", i ? ", " : "", p.x(), p.y());
    }
    out += "]]}}";
  }
  out += features.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

std::vector<GeoFeature> parse_geojson(const std::string& text, const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(fmt::format("{}: JSON parse error at byte {}: {}", source, e.byte, e.what()));
  }
  auto fail = [&](const std::string& what) { throw ValidationError(fmt::format("{}: {}", source, what)); };
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection") fail("expected a GeoJSON FeatureCollection");
  if (!doc.contains("features") || !doc["features"].is_array()) fail("missing 'features' array");

  std::vector<GeoFeature> out;
  for (std::size_t f = 0; f < doc["features"].size(); ++f) {
    const auto& feat = doc["features"][f];
    const std::string where = fmt::format("feature {}", f);
    if (!feat.is_object() || !feat.contains("geometry")) fail(where + ": missing geometry");
    const auto& geom = feat["geometry"];
    if (!geom.is_object() || geom.value("type", "") != "Polygon") fail(where + ": geometry must be a Polygon");
    if (!geom.contains("coordinates") || !geom["coordinates"].is_array() || geom["coordinates"].empty()) {
      fail(where + ": missing coordinates");
    }
    if (geom["coordinates"].size() > 1) fail(where + ": polygons with holes are not supported");
    const auto& coords = geom["coordinates"][0];
    if (!coords.is_array()) fail(where + ": ring must be an array of positions");
    std::vector<Point2> pts;
    for (const auto& c : coords) {
      if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
        fail(where + ": positions must be [x, y] numbers");
      }
      pts.emplace_back(c[0].get<double>(), c[1].get<double>());
    }
    if (pts.size() >= 2 && (pts.front() - pts.back()).norm() <= kVertexTolerance) pts.pop_back();
    GeoFeature gf{PolygonRing({{0, 0}, {1, 0}, {0, 1}}), std::nullopt};
    try {
      gf.ring = normalize_ring(std::move(pts));
    } catch (const ValidationError& e) {
      fail(where + ": " + e.what());
    }
    if (!is_simple(gf.ring)) fail(where + ": ring is not simple");
    if (feat.contains("properties") && feat["properties"].is_object() && feat["properties"].contains("score")) {
      const auto& s = feat["properties"]["score"];
      if (!s.is_number()) fail(where + ": score must be a number");
      const double score = s.get<double>();
      if (!(score >= 0.0 && score <= 1.0)) fail(where + ": score outside [0, 1]");
      gf.score = score;
    }
    out.push_back(std::move(gf));
  }
  return out;
}

void write_geojson(const fs::path& path, const std::vector<GeoFeature>& features) {
  write_text(path, geojson_string(features));
}

std::vector<GeoFeature> read_geojson(const fs::path& path) { return parse_geojson(read_text(path), path.string()); }

std::vector<GeoFeature> features_from_rings(const std::vector<PolygonRing>& rings) {
  std::vector<GeoFeature> out;
  for (const auto& r : rings) out.push_back({r, std::nullopt});
  return out;
}

std::vector<PolygonRing> rings_of(const std::vector<GeoFeature>& features) {
  std::vector<PolygonRing> out;
  for (const auto& f : features) out.push_back(f.ring);
  return out;
}

std::vector<Detection> detections_of(const std::vector<GeoFeature>& features) {
  std::vector<Detection> out;
  for (const auto& f : features) out.push_back({f.ring, f.score.value_or(1.0)});
  return out;
}

// ---------------------------------------------------------------- PGM

namespace {

std::vector<std::uint8_t> pgm_bytes(int height, int width, const GridArray<std::uint8_t>& pixels) {
  const std::string header = fmt::format("P5\n{} {}\n255\n", width, height);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), pixels.data(), pixels.data() + pixels.size());
  return out;
}

GridArray<std::uint8_t> parse_pgm(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  std::size_t pos = 0;
  auto fail = [&](const std::string& what) {
    throw IoError(fmt::format("{}: PGM {} at byte {}", source, what, pos));
  };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) fail(std::string("expected ") + what);
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (1L << 20)) fail(std::string(what) + " too large");
      ++pos;
    }
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') fail("magic (expected P5)");
  pos = 2;
  const long width = read_int("width");
  const long height = read_int("height");
  const long maxval = read_int("maxval");
  if (width < 1 || height < 1) fail("non-positive size");
  if (maxval < 1 || maxval > 255) fail("maxval must be in 1..255");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail("missing whitespace after header");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos < n) fail(fmt::format("truncated pixel data ({} of {} bytes)", bytes.size() - pos, n));
  if (bytes.size() - pos > n) {
    pos += n;
    fail("trailing data");
  }
  GridArray<std::uint8_t> px(height, width);
  std::memcpy(px.data(), bytes.data() + pos, n);
  if (maxval != 255) {
    for (Eigen::Index i = 0; i < px.size(); ++i) {
      px.data()[i] = static_cast<std::uint8_t>(std::lround(255.0 * px.data()[i] / static_cast<double>(maxval)));
    }
  }
  return px;
}

}  // namespace

void write_mask_pgm(const fs::path& path, const BinaryMask& mask) {
  const GridArray<std::uint8_t> px = (mask.bits() != 0).select(GridArray<std::uint8_t>::Constant(mask.height(), mask.width(), 255),
                                                               GridArray<std::uint8_t>::Zero(mask.height(), mask.width()));
  write_file_bytes(path, pgm_bytes(mask.height(), mask.width(), px));
}

BinaryMask read_mask_pgm(const fs::path& path) {
  return BinaryMask(parse_pgm(read_file_bytes(path), path.string()));
}

void write_prob_pgm(const fs::path& path, const ProbGrid& grid) {
  const GridArray<std::uint8_t> px = (grid.values() * 255.0).round().cast<std::uint8_t>();
  write_file_bytes(path, pgm_bytes(grid.height(), grid.width(), px));
}

ProbGrid read_prob_pgm(const fs::path& path) {
  return ProbGrid(parse_pgm(read_file_bytes(path), path.string()).cast<double>() / 255.0);
}

void write_prob_f32(const fs::path& path, const ProbGrid& grid) {
  std::vector<std::uint8_t> out{'P', 'R', 'B', '1'};
  put_u32(out, static_cast<std::uint32_t>(grid.height()));
  put_u32(out, static_cast<std::uint32_t>(grid.width()));
  for (Eigen::Index i = 0; i < grid.values().size(); ++i) put_f32(out, static_cast<float>(grid.values().data()[i]));
  write_file_bytes(path, out);
}

ProbGrid read_prob_f32(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader in(bytes, path.string());
  in.expect_magic("PRB1");
  const std::uint32_t h = in.u32("height");
  const std::uint32_t w = in.u32("width");
  check_dims(h, w, path.string());
  GridArray<double> values(h, w);
  for (Eigen::Index i = 0; i < values.size(); ++i) values.data()[i] = in.f32("probability");
  in.expect_end();
  try {
    return ProbGrid(std::move(values));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

ProbGrid read_prob_map(const fs::path& pgm_path) {
  fs::path sidecar = pgm_path;
  sidecar.replace_extension(".f32");
  if (fs::exists(sidecar)) return read_prob_f32(sidecar);
  return read_prob_pgm(pgm_path);
}

// ---------------------------------------------------------------- AFM

std::vector<std::uint8_t> afm_bytes(const AttractionField& field) {
  std::vector<std::uint8_t> out{'A', 'F', 'M', '1'};
  out.reserve(12 + 8 * static_cast<std::size_t>(field.height()) * static_cast<std::size_t>(field.width()));
  put_u32(out, static_cast<std::uint32_t>(field.height()));
  put_u32(out, static_cast<std::uint32_t>(field.width()));
  for (int r = 0; r < field.height(); ++r) {
    for (int c = 0; c < field.width(); ++c) {
      put_f32(out, static_cast<float>(field.dx()(r, c)));
      put_f32(out, static_cast<float>(field.dy()(r, c)));
    }
  }
  return out;
}

AttractionField afm_from_bytes(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  ByteReader in(bytes, source);
  in.expect_magic("AFM1");
  const std::uint32_t h = in.u32("height");
  const std::uint32_t w = in.u32("width");
  check_dims(h, w, source);
  if (in.remaining() != 8ull * h * w) {
    throw IoError(fmt::format("{}: expected {} bytes of vectors after the header, found {}", source, 8ull * h * w,
                              in.remaining()));
  }
  GridArray<double> dx(h, w), dy(h, w);
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      dx(r, c) = in.f32("dx");
      dy(r, c) = in.f32("dy");
    }
  }
  try {
    return AttractionField(std::move(dx), std::move(dy));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", source, e.what()));
  }
}

void write_afm(const fs::path& path, const AttractionField& field) { write_file_bytes(path, afm_bytes(field)); }

AttractionField read_afm(const fs::path& path) { return afm_from_bytes(read_file_bytes(path), path.string()); }

// ---------------------------------------------------------------- feature grid

void write_feature_grid(const fs::path& path, const FeatureGrid& grid) {
  std::vector<std::uint8_t> out{'F', 'M', 'P', '1'};
  put_u32(out, static_cast<std::uint32_t>(grid.height()));
  put_u32(out, static_cast<std::uint32_t>(grid.width()));
  put_u32(out, static_cast<std::uint32_t>(grid.channels()));
  const auto& d = grid.data();
  for (Eigen::Index i = 0; i < d.size(); ++i) put_f64(out, d.data()[i]);
  write_file_bytes(path, out);
}

FeatureGrid read_feature_grid(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader in(bytes, path.string());
  in.expect_magic("FMP1");
  const std::uint32_t h = in.u32("height");
  const std::uint32_t w = in.u32("width");
  const std::uint32_t c = in.u32("channels");
  check_dims(h, w, path.string());
  if (c == 0 || c > 4096) throw IoError(fmt::format("{}: unsupported channel count {}", path.string(), c));
  if (in.remaining() != 8ull * h * w * c) {
    throw IoError(fmt::format("{}: expected {} bytes of features, found {}", path.string(), 8ull * h * w * c,
                              in.remaining()));
  }
  FeatureGrid::Storage data(static_cast<Eigen::Index>(h) * w, c);
  for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = in.f64("feature");
  try {
    return FeatureGrid(static_cast<int>(h), static_cast<int>(w), std::move(data));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

// ---------------------------------------------------------------- reports

namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

nlohmann::json metrics_json(const MetricsReport& m, bool with_instances) {
  nlohmann::json j;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["polis_mean"] = optional_json(m.polis_mean);
  j["mta_mean"] = optional_json(m.mta_mean);
  j["mta_max"] = optional_json(m.mta_max);
  j["ap"] = m.ap;
  j["ar"] = m.ar;
  if (with_instances) {
    j["per_instance"] = nlohmann::json::array();
    for (const auto& inst : m.per_instance) {
      j["per_instance"].push_back({{"detection", inst.detection},
                                   {"ground_truth", inst.ground_truth},
                                   {"polis", inst.polis},
                                   {"mta", inst.mta},
                                   {"iou", inst.iou}});
    }
  }
  return j;
}

std::string csv_optional(const std::optional<double>& v) { return v ? fmt::format("{:.17g}", *v) : ""; }

std::string csv_row(const std::string& name, const MetricsReport& m) {
  return fmt::format("{},{:.17g},{:.17g},{},{},{},{:.17g},{:.17g},{}\n", name, m.precision, m.recall,
                     csv_optional(m.polis_mean), csv_optional(m.mta_mean), csv_optional(m.mta_max), m.ap, m.ar,
                     m.per_instance.size());
}

}  // namespace

MetricsReport aggregate(const std::vector<SceneReport>& scenes) {
  MetricsReport agg;
  if (scenes.empty()) return agg;
  double polis_sum = 0.0, mta_sum = 0.0, mta_max = 0.0;
  int polis_n = 0, mta_n = 0;
  for (const auto& s : scenes) {
    agg.precision += s.metrics.precision;
    agg.recall += s.metrics.recall;
    agg.ap += s.metrics.ap;
    agg.ar += s.metrics.ar;
    if (s.metrics.polis_mean) {
      polis_sum += *s.metrics.polis_mean;
      ++polis_n;
    }
    if (s.metrics.mta_mean) {
      mta_sum += *s.metrics.mta_mean;
      ++mta_n;
    }
    if (s.metrics.mta_max) mta_max = std::max(mta_max, *s.metrics.mta_max);
    agg.per_instance.insert(agg.per_instance.end(), s.metrics.per_instance.begin(), s.metrics.per_instance.end());
  }
  const double n = static_cast<double>(scenes.size());
  agg.precision /= n;
  agg.recall /= n;
  agg.ap /= n;
  agg.ar /= n;
  if (polis_n) agg.polis_mean = polis_sum / polis_n;
  if (mta_n) {
    agg.mta_mean = mta_sum / mta_n;
    agg.mta_max = mta_max;
  }
  return agg;
}

std::string report_json(const std::vector<SceneReport>& scenes) {
  nlohmann::json doc;
  doc["scenes"] = nlohmann::json::array();
  for (const auto& s : scenes) {
    nlohmann::json j = metrics_json(s.metrics, true);
    j["name"] = s.name;
    doc["scenes"].push_back(std::move(j));
  }
  doc["aggregate"] = metrics_json(aggregate(scenes), false);
  return doc.dump(2) + "\n";
}

std::string report_csv(const std::vector<SceneReport>& scenes) {
  std::string out = "scene,precision,recall,polis_mean,mta_mean,mta_max,ap,ar,matched\n";
  for (const auto& s : scenes) out += csv_row(s.name, s.metrics);
  out += csv_row("aggregate", aggregate(scenes));
  return out;
}

// ---------------------------------------------------------------- bundles

void write_bundle(const fs::path& dir, const Scene& scene) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("{}: cannot create directory: {}", dir.string(), ec.message()));
  const BundlePaths p{dir};
  write_geojson(p.gt(), features_from_rings(scene.gt_rings));
  write_geojson(p.pred(), features_from_rings(scene.corrupted_rings));
  write_mask_pgm(p.mask(), scene.mask);
  write_prob_pgm(p.convex(), scene.convex_map);
  write_prob_f32(fs::path(p.convex()).replace_extension(".f32"), scene.convex_map);
  write_prob_pgm(p.concave(), scene.concave_map);
  write_prob_f32(fs::path(p.concave()).replace_extension(".f32"), scene.concave_map);
  write_afm(p.field(), scene.afm);
}

Bundle read_bundle(const fs::path& dir) {
  const BundlePaths p{dir};
  Bundle b;
  b.gt = rings_of(read_geojson(p.gt()));
  b.pred = rings_of(read_geojson(p.pred()));
  b.mask = read_mask_pgm(p.mask());
  b.convex = read_prob_map(p.convex());
  b.concave = read_prob_map(p.concave());
  b.field = read_afm(p.field());
  const int h = b.mask.height(), w = b.mask.width();
  auto check = [&](int hh, int ww, const fs::path& what) {
    if (hh != h || ww != w) {
      throw ValidationError(
          fmt::format("{}: size {}x{} does not match mask size {}x{}", what.string(), ww, hh, w, h));
    }
  };
  check(b.convex.height(), b.convex.width(), p.convex());
  check(b.concave.height(), b.concave.width(), p.concave());
  check(b.field.height(), b.field.width(), p.field());
  return b;
}

}  // namespace polyfield::io
