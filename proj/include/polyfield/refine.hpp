#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "polyfield/afm.hpp"
#include "polyfield/geometry.hpp"
#include "polyfield/raster.hpp"

namespace polyfield {

/// Cycle graph over ring vertices. Row i of `features` belongs to vertex i.
struct RingGraph {
  PolygonRing vertices;
  Eigen::MatrixXd features;
};

enum class Activation { relu, identity };

struct GcnLayer {
  Eigen::MatrixXd w_self;  // out x in
  Eigen::MatrixXd w_nbr;   // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::relu;

  Eigen::Index in_dim() const { return w_self.cols(); }
  Eigen::Index out_dim() const { return w_self.rows(); }
};

struct GcnHead {
  Eigen::MatrixXd w;     // 2 x in
  Eigen::VectorXd bias;  // 2
};

struct GcnWeights {
  std::vector<GcnLayer> layers;
  GcnHead head;

  /// Input feature width expected by the first layer (or the head when there are no layers).
  Eigen::Index input_dim() const;

  /// Checks the dimension chain; throws DimensionError naming the offending layer.
  void validate() const;
};

struct RefineConfig {
  int steps = 3;
  double offset_clamp = 8.0;  // px per step and per axis
  bool share_weights = true;  // one weight set for all GCN steps
  double lr = 1.0;
  int iters = 400;
  double lambda_ortho = 1.0;
};

/// Per-vertex features: bilinear sample of `fmap` followed by (x / W, y / H).
RingGraph build_graph(const PolygonRing& ring, const FeatureGrid& fmap);

/// h'_i = act(W_self h_i + W_nbr mean(h_{i-1}, h_{i+1}) + bias).
RingGraph gcn_layer(const RingGraph& graph, const GcnLayer& layer);

/// Per-vertex (dx, dy) offsets predicted by the layers and head, before clamping.
Eigen::MatrixXd gcn_offsets(const RingGraph& graph, const GcnWeights& weights);

/// Iterative offset refinement. With share_weights the first weight set is used
/// for every step, otherwise one set per step is required.
PolygonRing gcn_refine(const PolygonRing& ring, const FeatureGrid& fmap, std::span<const GcnWeights> weights,
                       const RefineConfig& cfg = {});
PolygonRing gcn_refine(const PolygonRing& ring, const FeatureGrid& fmap, const GcnWeights& weights,
                       const RefineConfig& cfg = {});

/// mean_i ||field(v_i)||^2, the attraction data term.
double attraction_energy(const PolygonRing& ring, const AttractionField& field);
Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> attraction_energy_grad(const PolygonRing& ring,
                                                                                 const AttractionField& field);

/// attraction_energy + lambda_ortho * ring_ortho_penalty.
double refine_energy(const PolygonRing& ring, const AttractionField& field, double lambda_ortho);

struct EnergyRefineResult {
  PolygonRing ring;
  std::vector<double> energies;  // energy of the accepted iterate, starting with the input
};

/// Gradient descent on refine_energy with backtracking (lr halves on an energy
/// increase, at most 20 times per iteration). A simple input ring stays simple:
/// steps that would self-intersect are backtracked too. Returns the lowest-energy ring seen.
EnergyRefineResult energy_refine_traced(const PolygonRing& ring, const AttractionField& field,
                                        const RefineConfig& cfg = {});
PolygonRing energy_refine(const PolygonRing& ring, const AttractionField& field, const RefineConfig& cfg = {});

/// JSON document {layers: [{w_self, w_nbr, bias, activation}], head: {w, bias}},
/// numbers written with 17 significant digits.
std::string weights_to_json(const GcnWeights& weights);
GcnWeights weights_from_json(const std::string& text);

void save_weights(const GcnWeights& weights, const std::filesystem::path& path);
GcnWeights load_weights(const std::filesystem::path& path);

}  // namespace polyfield
