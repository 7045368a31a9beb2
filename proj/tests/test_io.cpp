#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "oracles.hpp"
#include "polyfield/error.hpp"
#include "polyfield/io.hpp"
#include "polyfield/synth.hpp"

using namespace polyfield;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "polyfield_test_io" / name;
  fs::create_directories(p.parent_path());
  return p;
}

void write_raw(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

}  // namespace

TEST_CASE("GeoJSON round trip at 9 decimals") {
  oracle::Rng rng(1);
  std::vector<io::GeoFeature> feats;
  for (int k = 0; k < 10; ++k) {
    feats.push_back({oracle::random_star(rng, 3 + k, {50, 50}, 5, 40), k % 2 ? std::optional<double>(0.25 * (k % 4)) : std::nullopt});
  }
  const auto back = io::parse_geojson(io::geojson_string(feats));
  REQUIRE(back.size() == feats.size());
  for (std::size_t i = 0; i < feats.size(); ++i) {
    REQUIRE(back[i].ring.size() == feats[i].ring.size());
    for (std::size_t v = 0; v < feats[i].ring.size(); ++v) CHECK((back[i].ring[v] - feats[i].ring[v]).norm() < 1e-9);
    CHECK(back[i].score == feats[i].score);
  }
  const auto doc = nlohmann::json::parse(io::geojson_string(feats));
  CHECK(doc["type"] == "FeatureCollection");
  const auto& coords = doc["features"][0]["geometry"]["coordinates"][0];
  CHECK(coords.front() == coords.back());
}

TEST_CASE("GeoJSON errors") {
  CHECK_THROWS_AS(io::parse_geojson("{\"type\": \"FeatureCollection\", \"features\": [", "x.geojson"), IoError);
  try {
    io::parse_geojson("{\"type\": ", "broken.geojson");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("broken.geojson") != std::string::npos);
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
  const std::string bowtie = R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{},
    "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,1],[1,0],[0,1],[0,0]]]}}]})";
  CHECK_THROWS_AS(io::parse_geojson(bowtie), ValidationError);
  const std::string bad_score = R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{"score":2},
    "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}}]})";
  CHECK_THROWS_AS(io::parse_geojson(bad_score), ValidationError);
  CHECK_THROWS_AS(io::read_geojson(scratch("missing.geojson")), IoError);
}

TEST_CASE("GeoJSON reader normalizes orientation") {
  const std::string cw = R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{},
    "geometry":{"type":"Polygon","coordinates":[[[0,0],[0,2],[2,2],[2,0],[0,0]]]}}]})";
  const auto f = io::parse_geojson(cw);
  REQUIRE(f.size() == 1);
  CHECK(signed_area(f[0].ring) == doctest::Approx(4.0));
}

TEST_CASE("mask PGM round trip is exact") {
  oracle::Rng rng(2);
  BinaryMask m(13, 17);
  for (int r = 0; r < 13; ++r) {
    for (int c = 0; c < 17; ++c) m.set(r, c, rng() & 1);
  }
  const fs::path p = scratch("mask.pgm");
  io::write_mask_pgm(p, m);
  CHECK(io::read_mask_pgm(p) == m);
  const auto bytes = io::read_file_bytes(p);
  CHECK(std::string(bytes.begin(), bytes.begin() + 3) == "P5\n");
  CHECK(bytes.size() == std::string("P5\n17 13\n255\n").size() + 13 * 17);
}

TEST_CASE("PGM parsing accepts comments and other maxvals") {
  const fs::path p = scratch("comment.pgm");
  write_raw(p, std::string("P5\n# a comment\n2 1\n15\n") + char(0) + char(15));
  const ProbGrid g = io::read_prob_pgm(p);
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == 1.0);
  CHECK(io::read_mask_pgm(p).count() == 1);
  write_raw(p, "P5\n4 4\n255\n\x01\x02");
  CHECK_THROWS_AS(io::read_mask_pgm(p), IoError);
  write_raw(p, "P2\n1 1\n255\n0");
  CHECK_THROWS_AS(io::read_mask_pgm(p), IoError);
}

TEST_CASE("probability maps: PGM quantizes, sidecar is lossless at float precision") {
  oracle::Rng rng(3);
  ProbGrid g(6, 9);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 9; ++c) g.set(r, c, static_cast<float>(oracle::uniform(rng, 0, 1)));
  }
  const fs::path pgm = scratch("prob.pgm");
  io::write_prob_pgm(pgm, g);
  const ProbGrid q = io::read_prob_pgm(pgm);
  CHECK((q.values() - g.values()).abs().maxCoeff() <= 0.5 / 255 + 1e-12);
  const fs::path f32 = scratch("prob.f32");
  io::write_prob_f32(f32, g);
  CHECK((io::read_prob_f32(f32).values() == g.values()).all());
  CHECK((io::read_prob_map(pgm).values() == g.values()).all());
}

TEST_CASE("AFM format") {
  AttractionField f(2, 3);
  f.set(0, 0, {1.5, -2.25});
  f.set(1, 2, {0.125, 7});
  const auto bytes = io::afm_bytes(f);
  REQUIRE(bytes.size() == 4 + 8 + 2 * 3 * 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "AFM1");
  CHECK(bytes[4] == 2);
  CHECK(bytes[8] == 3);
  CHECK(io::afm_from_bytes(bytes) == f);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(io::afm_from_bytes(truncated, "t.afm"), IoError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(io::afm_from_bytes(trailing), IoError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(io::afm_from_bytes(magic), IoError);
}

TEST_CASE("AFM round trip of float-representable fields is bit exact") {
  oracle::Rng rng(4);
  AttractionField f(11, 7);
  for (int r = 0; r < 11; ++r) {
    for (int c = 0; c < 7; ++c) {
      f.set(r, c, {static_cast<float>(oracle::uniform(rng, -30, 30)), static_cast<float>(oracle::uniform(rng, -30, 30))});
    }
  }
  const fs::path p = scratch("f.afm");
  io::write_afm(p, f);
  CHECK(io::read_afm(p) == f);
}

TEST_CASE("feature grid round trip") {
  oracle::Rng rng(5);
  FeatureGrid g(5, 4, 3);
  for (Eigen::Index i = 0; i < g.data().size(); ++i) g.data().data()[i] = oracle::uniform(rng, -1, 1);
  const fs::path p = scratch("fmap.bin");
  io::write_feature_grid(p, g);
  const FeatureGrid back = io::read_feature_grid(p);
  CHECK(back.channels() == 3);
  CHECK(back.data() == g.data());
}

TEST_CASE("bundles round trip") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.height = 64 + 8 * static_cast<int>(seed);
    spec.width = 80;
    spec.n_buildings = 1 + static_cast<int>(seed % 3);
    const Scene s = render_scene(spec);
    const fs::path dir = scratch("bundle_" + std::to_string(seed));
    io::write_bundle(dir, s);
    const io::Bundle b = io::read_bundle(dir);
    REQUIRE(b.gt.size() == s.gt_rings.size());
    for (std::size_t i = 0; i < b.gt.size(); ++i) {
      for (std::size_t v = 0; v < b.gt[i].size(); ++v) CHECK((b.gt[i][v] - s.gt_rings[i][v]).norm() < 1e-9);
    }
    CHECK(b.mask == s.mask);
    CHECK((b.convex.values() - s.convex_map.values()).abs().maxCoeff() < 1e-7);
    CHECK((b.field.dx() - s.afm.dx()).abs().maxCoeff() < 1e-5);
  }
  const fs::path dir = scratch("bundle_0");
  io::write_mask_pgm(io::BundlePaths{dir}.mask(), BinaryMask(3, 3));
  CHECK_THROWS_AS(io::read_bundle(dir), ValidationError);
}

TEST_CASE("reports") {
  MetricsReport m;
  m.precision = 1;
  m.recall = 0.5;
  m.polis_mean = 0.25;
  m.mta_mean = 10;
  m.mta_max = 20;
  m.ap = 0.5;
  m.ar = 0.75;
  m.per_instance.push_back({0, 0, 0.25, 10, 0.9});
  MetricsReport empty;
  const std::vector<io::SceneReport> scenes{{"a", m}, {"b", empty}};
  const auto doc = nlohmann::json::parse(io::report_json(scenes));
  REQUIRE(doc["scenes"].size() == 2);
  CHECK(doc["scenes"][0]["polis_mean"] == 0.25);
  CHECK(doc["scenes"][1]["polis_mean"].is_null());
  CHECK(doc["aggregate"]["polis_mean"] == 0.25);
  CHECK(doc["aggregate"]["recall"] == 0.25);
  const std::string csv = io::report_csv(scenes);
  CHECK(csv.rfind("scene,precision,recall,polis_mean,mta_mean,mta_max,ap,ar,matched\n", 0) == 0);
  CHECK(csv.find("\naggregate,") != std::string::npos);
  CHECK(csv.substr(csv.size() - 3) == ",1\n");
}
