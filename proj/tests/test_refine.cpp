#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "polyfield/error.hpp"
#include "polyfield/gradcheck.hpp"
#include "polyfield/metrics.hpp"
#include "polyfield/refine.hpp"
#include "polyfield/synth.hpp"

using namespace polyfield;

namespace {

Eigen::MatrixXd random_matrix(oracle::Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = oracle::uniform(rng, -scale, scale);
  return m;
}

GcnWeights random_weights(oracle::Rng& rng, Eigen::Index in, int layers, double scale = 1.0) {
  GcnWeights w;
  Eigen::Index d = in;
  for (int l = 0; l < layers; ++l) {
    const Eigen::Index out = 2 + static_cast<Eigen::Index>(rng() % 5);
    GcnLayer layer;
    layer.w_self = random_matrix(rng, out, d, scale);
    layer.w_nbr = random_matrix(rng, out, d, scale);
    layer.bias = random_matrix(rng, out, 1, scale);
    layer.activation = (rng() & 1) ? Activation::relu : Activation::identity;
    w.layers.push_back(layer);
    d = out;
  }
  w.head.w = random_matrix(rng, 2, d, scale);
  w.head.bias = random_matrix(rng, 2, 1, scale);
  return w;
}

FeatureGrid random_fmap(oracle::Rng& rng, int h, int w, int c) {
  FeatureGrid g(h, w, c);
  for (Eigen::Index i = 0; i < g.data().size(); ++i) g.data().data()[i] = oracle::uniform(rng, -1, 1);
  return g;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("polyfield_test_refine_" + name);
}

}  // namespace

TEST_CASE("build_graph with a constant feature map") {
  FeatureGrid g(10, 20, 2);
  g.data().col(0).setConstant(0.25);
  g.data().col(1).setConstant(-3.0);
  const PolygonRing sq({{2, 2}, {6, 2}, {6, 6}, {2, 6}});
  const RingGraph graph = build_graph(sq, g);
  REQUIRE(graph.features.rows() == 4);
  REQUIRE(graph.features.cols() == 4);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(graph.features(i, 0) == doctest::Approx(0.25));
    CHECK(graph.features(i, 1) == doctest::Approx(-3.0));
    CHECK(graph.features(i, 2) == doctest::Approx(sq[i].x() / 20));
    CHECK(graph.features(i, 3) == doctest::Approx(sq[i].y() / 10));
  }
}

TEST_CASE("build_graph matches a per-vertex loop") {
  oracle::Rng rng(1);
  const FeatureGrid g = random_fmap(rng, 12, 9, 3);
  for (int k = 0; k < 20; ++k) {
    const PolygonRing r = oracle::random_star(rng, 3 + k % 8, {4.5, 6}, 1, 4);
    const RingGraph graph = build_graph(r, g);
    for (std::size_t i = 0; i < r.size(); ++i) {
      for (int ch = 0; ch < 3; ++ch) {
        Eigen::MatrixXd m(12, 9);
        for (int row = 0; row < 12; ++row) {
          for (int col = 0; col < 9; ++col) m(row, col) = g.cell(row, col)(ch);
        }
        CHECK(graph.features(i, ch) == doctest::Approx(oracle::bilinear_naive(m, r[i])).epsilon(1e-12));
      }
    }
  }
  // Vertices on cell centers read the stored cells.
  const RingGraph on_centers = build_graph(PolygonRing({{1.5, 1.5}, {4.5, 1.5}, {4.5, 3.5}}), g);
  CHECK(on_centers.features(1, 0) == g.cell(1, 4)(0));
}

TEST_CASE("gcn_layer hand cases") {
  RingGraph tri{PolygonRing({{0, 0}, {1, 0}, {0, 1}}), Eigen::MatrixXd(3, 1)};
  tri.features << 1, 2, 3;
  GcnLayer id{Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1),
              Activation::identity};
  CHECK(gcn_layer(tri, id).features == tri.features);
  GcnLayer nbr{Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1),
               Activation::identity};
  const Eigen::MatrixXd out = gcn_layer(tri, nbr).features;
  CHECK(out(0, 0) == doctest::Approx(2.5));
  CHECK(out(1, 0) == doctest::Approx(2.0));
  CHECK(out(2, 0) == doctest::Approx(1.5));
  GcnLayer bad{Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2),
               Activation::identity};
  CHECK_THROWS_AS(gcn_layer(tri, bad), DimensionError);
}

TEST_CASE("gcn_layer matches the dense adjacency form") {
  oracle::Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    const int n = 3 + k % 4;
    const Eigen::Index in = 1 + static_cast<Eigen::Index>(rng() % 5);
    RingGraph g{oracle::random_star(rng, n, {0, 0}, 1, 3), random_matrix(rng, n, in)};
    const GcnWeights w = random_weights(rng, in, 1);
    const Eigen::MatrixXd got = gcn_layer(g, w.layers[0]).features;
    CHECK((got - oracle::gcn_layer_dense(g.features, w.layers[0])).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("weights validation") {
  oracle::Rng rng(3);
  GcnWeights w = random_weights(rng, 4, 2);
  CHECK(w.input_dim() == 4);
  CHECK_NOTHROW(w.validate());
  w.layers[1].w_self.resize(w.layers[1].w_self.rows(), w.layers[1].w_self.cols() + 1);
  CHECK_THROWS_AS(w.validate(), DimensionError);
  GcnWeights head_only;
  head_only.head.w = Eigen::MatrixXd::Zero(3, 5);
  head_only.head.bias = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(head_only.validate(), DimensionError);
}

TEST_CASE("gcn_refine with a zero head is the identity") {
  oracle::Rng rng(4);
  const FeatureGrid g = random_fmap(rng, 32, 32, 3);
  GcnWeights w = random_weights(rng, 5, 2);
  w.head.w.setZero();
  w.head.bias.setZero();
  const PolygonRing r = oracle::random_star(rng, 9, {16, 16}, 4, 12);
  RefineConfig cfg;
  for (int steps : {1, 3, 7}) {
    cfg.steps = steps;
    CHECK(gcn_refine(r, g, w, cfg) == r);
  }
}

TEST_CASE("gcn_refine clamps each step and is deterministic") {
  oracle::Rng rng(5);
  const FeatureGrid g = random_fmap(rng, 32, 32, 2);
  for (int k = 0; k < 20; ++k) {
    const GcnWeights w = random_weights(rng, 4, 1 + k % 3, 5.0);
    const PolygonRing r = oracle::random_star(rng, 6, {16, 16}, 4, 12);
    RefineConfig one;
    one.steps = 1;
    one.offset_clamp = 2.5;
    const PolygonRing out = gcn_refine(r, g, w, one);
    REQUIRE(out.size() == r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      CHECK((out[i] - r[i]).norm() <= std::sqrt(2.0) * 2.5 + 1e-12);
      CHECK(std::abs(out[i].x() - r[i].x()) <= 2.5 + 1e-12);
    }
    RefineConfig three;
    CHECK(gcn_refine(r, g, w, three) == gcn_refine(r, g, w, three));
  }
}

TEST_CASE("gcn_refine with per-step weights") {
  oracle::Rng rng(6);
  const FeatureGrid g = random_fmap(rng, 16, 16, 1);
  std::vector<GcnWeights> ws{random_weights(rng, 3, 1), random_weights(rng, 3, 1)};
  RefineConfig cfg;
  cfg.share_weights = false;
  cfg.steps = 2;
  const PolygonRing r = oracle::random_star(rng, 5, {8, 8}, 2, 6);
  CHECK_NOTHROW(gcn_refine(r, g, ws, cfg));
  cfg.steps = 3;
  CHECK_THROWS_AS(gcn_refine(r, g, ws, cfg), ValidationError);
}

TEST_CASE("energy_refine keeps a ring that already lies on the boundary") {
  const PolygonRing sq({{8.5, 8.5}, {20.5, 8.5}, {20.5, 20.5}, {8.5, 20.5}});
  const std::vector<PolygonRing> rings{sq};
  const AttractionField f = encode_afm(rings, 30, 30);
  CHECK(attraction_energy_grad(sq, f).cwiseAbs().maxCoeff() < 1e-12);
  RefineConfig cfg;
  cfg.lambda_ortho = 0.0;
  const PolygonRing out = energy_refine(sq, f, cfg);
  for (std::size_t i = 0; i < 4; ++i) CHECK((out[i] - sq[i]).norm() < 1e-9);
}

TEST_CASE("attraction gradient matches finite differences away from cell boundaries") {
  oracle::Rng rng(7);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.height = 64;
    spec.width = 64;
    spec.n_buildings = 1;
    const Scene s = render_scene(spec);
    const PolygonRing r = oracle::random_star(rng, 8, {32, 32}, 5, 25);
    const auto g = attraction_energy_grad(r, s.afm);
    Eigen::VectorXd x(2 * r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      x(2 * i) = r[i].x();
      x(2 * i + 1) = r[i].y();
    }
    const Eigen::VectorXd fd = numeric_gradient(
        [&](const Eigen::VectorXd& v) {
          std::vector<Point2> pts;
          for (Eigen::Index i = 0; i < v.size() / 2; ++i) pts.emplace_back(v(2 * i), v(2 * i + 1));
          return attraction_energy(PolygonRing(pts), s.afm);
        },
        x);
    const Eigen::VectorXd an = Eigen::Map<const Eigen::VectorXd>(g.data(), x.size());
    CHECK(gradient_rel_error(an, fd) < 1e-3);
  }
}

TEST_CASE("energy_refine on jittered squares") {
  double before = 0.0, after = 0.0;
  oracle::Rng rng(8);
  const PolygonRing truth({{12.5, 12.5}, {36.5, 12.5}, {36.5, 36.5}, {12.5, 36.5}});
  const std::vector<PolygonRing> rings{truth};
  const AttractionField f = encode_afm(rings, 48, 48);
  const double half = 2.0 * std::sqrt(3.0);  // uniform noise with standard deviation 2
  for (int seed = 0; seed < 100; ++seed) {
    std::vector<Point2> v;
    for (const auto& p : truth) v.push_back(p + Point2(oracle::uniform(rng, -half, half), oracle::uniform(rng, -half, half)));
    const PolygonRing noisy(v);
    const EnergyRefineResult res = energy_refine_traced(noisy, f);
    CHECK(res.ring.size() == noisy.size());
    CHECK(res.energies.back() <= res.energies.front());
    CHECK(refine_energy(res.ring, f, 1.0) <= refine_energy(noisy, f, 1.0));
    before += polis(noisy, truth);
    after += polis(res.ring, truth);
  }
  CHECK(after < 0.5 * before);
}

TEST_CASE("energy sequence is non-increasing at small step sizes") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.height = 96;
    spec.width = 96;
    spec.n_buildings = 1 + static_cast<int>(seed % 3);
    const Scene s = render_scene(spec);
    RefineConfig cfg;
    cfg.lr = 0.05;
    cfg.iters = 100;
    for (const auto& r : s.corrupted_rings) {
      const EnergyRefineResult res = energy_refine_traced(r, s.afm, cfg);
      for (std::size_t i = 1; i < res.energies.size(); ++i) CHECK(res.energies[i] <= res.energies[i - 1]);
      if (is_simple(r)) CHECK(is_simple(res.ring));
    }
  }
}

TEST_CASE("weights round trip") {
  oracle::Rng rng(9);
  for (int layers = 1; layers <= 5; ++layers) {
    const GcnWeights w = random_weights(rng, 3, layers);
    const std::string text = weights_to_json(w);
    const GcnWeights back = weights_from_json(text);
    REQUIRE(back.layers.size() == w.layers.size());
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
      CHECK(back.layers[l].w_self == w.layers[l].w_self);
      CHECK(back.layers[l].w_nbr == w.layers[l].w_nbr);
      CHECK(back.layers[l].bias == w.layers[l].bias);
      CHECK(back.layers[l].activation == w.layers[l].activation);
    }
    CHECK(back.head.w == w.head.w);
    CHECK(back.head.bias == w.head.bias);
    CHECK(weights_to_json(back) == text);
  }
  const auto path = temp_path("weights.json");
  const GcnWeights w = random_weights(rng, 4, 2);
  save_weights(w, path);
  std::stringstream first;
  first << std::ifstream(path).rdbuf();
  save_weights(load_weights(path), path);
  std::stringstream second;
  second << std::ifstream(path).rdbuf();
  CHECK(first.str() == second.str());
  std::filesystem::remove(path);
}

TEST_CASE("malformed weights are rejected") {
  oracle::Rng rng(10);
  const std::string text = weights_to_json(random_weights(rng, 3, 2));
  CHECK_THROWS_AS(weights_from_json(text.substr(0, text.size() / 2)), IoError);
  CHECK_THROWS_AS(weights_from_json("{\"layers\": [], \"head\": {\"w\": [[1, 2]], \"bias\": [0]}}"),
                  DimensionError);
  CHECK_THROWS_AS(load_weights(temp_path("does_not_exist.json")), IoError);
}
