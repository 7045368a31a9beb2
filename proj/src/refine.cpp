#include "polyfield/refine.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "polyfield/error.hpp"
#include "polyfield/losses.hpp"

namespace polyfield {

Eigen::Index GcnWeights::input_dim() const { return layers.empty() ? head.w.cols() : layers.front().in_dim(); }

void GcnWeights::validate() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const GcnLayer& l = layers[i];
    if (l.w_nbr.rows() != l.w_self.rows() || l.w_nbr.cols() != l.w_self.cols()) {
      throw DimensionError(fmt::format("layer {}: w_self is {}x{} but w_nbr is {}x{}", i, l.w_self.rows(),
                                       l.w_self.cols(), l.w_nbr.rows(), l.w_nbr.cols()));
    }
    if (l.bias.size() != l.out_dim()) {
      throw DimensionError(fmt::format("layer {}: bias has {} entries, expected {}", i, l.bias.size(), l.out_dim()));
    }
    if (l.in_dim() < 1 || l.out_dim() < 1) throw DimensionError(fmt::format("layer {}: empty weight matrix", i));
    if (i > 0 && l.in_dim() != layers[i - 1].out_dim()) {
      throw DimensionError(fmt::format("layer {}: input width {} does not match previous output width {}", i,
                                       l.in_dim(), layers[i - 1].out_dim()));
    }
    if (!l.w_self.allFinite() || !l.w_nbr.allFinite() || !l.bias.allFinite()) {
      throw ValidationError(fmt::format("layer {}: non-finite weight", i));
    }
  }
  if (head.w.rows() != 2) throw DimensionError(fmt::format("head: output dimension is {}, expected 2", head.w.rows()));
  if (head.bias.size() != 2) throw DimensionError("head: bias must have 2 entries");
  const Eigen::Index expected = layers.empty() ? head.w.cols() : layers.back().out_dim();
  if (head.w.cols() != expected || head.w.cols() < 1) {
    throw DimensionError(fmt::format("head: input width {} does not match last layer output width {}",
                                     head.w.cols(), expected));
  }
  if (!head.w.allFinite() || !head.bias.allFinite()) throw ValidationError("head: non-finite weight");
}

RingGraph build_graph(const PolygonRing& ring, const FeatureGrid& fmap) {
  const Eigen::Index n = static_cast<Eigen::Index>(ring.size());
  const int c = fmap.channels();
  Eigen::MatrixXd features(n, c + 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point2& v = ring[static_cast<std::size_t>(i)];
    features.row(i).head(c) = bilinear_sample(fmap, v).transpose();
    features(i, c) = v.x() / fmap.width();
    features(i, c + 1) = v.y() / fmap.height();
  }
  return {ring, std::move(features)};
}

RingGraph gcn_layer(const RingGraph& graph, const GcnLayer& layer) {
  const Eigen::MatrixXd& h = graph.features;
  if (h.cols() != layer.in_dim()) {
    throw DimensionError(fmt::format("gcn_layer: features have width {}, layer expects {}", h.cols(), layer.in_dim()));
  }
  const Eigen::Index n = h.rows();
  Eigen::MatrixXd nbr(n, h.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    nbr.row(i) = 0.5 * (h.row((i + n - 1) % n) + h.row((i + 1) % n));
  }
  Eigen::MatrixXd out = h * layer.w_self.transpose() + nbr * layer.w_nbr.transpose();
  out.rowwise() += layer.bias.transpose();
  if (layer.activation == Activation::relu) out = out.cwiseMax(0.0);
  return {graph.vertices, std::move(out)};
}

Eigen::MatrixXd gcn_offsets(const RingGraph& graph, const GcnWeights& weights) {
  RingGraph g = graph;
  for (const auto& layer : weights.layers) g = gcn_layer(g, layer);
  if (g.features.cols() != weights.head.w.cols()) {
    throw DimensionError(fmt::format("gcn head expects width {}, got {}", weights.head.w.cols(), g.features.cols()));
  }
  Eigen::MatrixXd offsets = g.features * weights.head.w.transpose();
  offsets.rowwise() += weights.head.bias.transpose();
  return offsets;
}

PolygonRing gcn_refine(const PolygonRing& ring, const FeatureGrid& fmap, std::span<const GcnWeights> weights,
                       const RefineConfig& cfg) {
  if (cfg.steps < 1) throw ValidationError("refine: steps must be at least 1");
  if (!(cfg.offset_clamp > 0.0)) throw ValidationError("refine: offset_clamp must be positive");
  if (weights.empty()) throw ValidationError("refine: no GCN weights given");
  if (!cfg.share_weights && weights.size() < static_cast<std::size_t>(cfg.steps)) {
    throw ValidationError(fmt::format("refine: {} steps need {} weight sets, got {}", cfg.steps, cfg.steps,
                                      weights.size()));
  }
  for (const auto& w : weights) w.validate();

  PolygonRing current = ring;
  for (int step = 0; step < cfg.steps; ++step) {
    const GcnWeights& w = cfg.share_weights ? weights.front() : weights[static_cast<std::size_t>(step)];
    const Eigen::MatrixXd offsets =
        gcn_offsets(build_graph(current, fmap), w).cwiseMax(-cfg.offset_clamp).cwiseMin(cfg.offset_clamp);
    for (std::size_t i = 0; i < current.size(); ++i) {
      current[i] += offsets.row(static_cast<Eigen::Index>(i)).transpose();
    }
  }
  return current;
}

PolygonRing gcn_refine(const PolygonRing& ring, const FeatureGrid& fmap, const GcnWeights& weights,
                       const RefineConfig& cfg) {
  return gcn_refine(ring, fmap, std::span<const GcnWeights>(&weights, 1), cfg);
}

double attraction_energy(const PolygonRing& ring, const AttractionField& field) {
  double sum = 0.0;
  for (const auto& v : ring) sum += sample_field(field, v).value.squaredNorm();
  return sum / static_cast<double>(ring.size());
}

Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> attraction_energy_grad(const PolygonRing& ring,
                                                                                 const AttractionField& field) {
  const double n = static_cast<double>(ring.size());
  Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> grad(static_cast<Eigen::Index>(ring.size()), 2);
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const FieldSample s = sample_field(field, ring[i]);
    grad.row(static_cast<Eigen::Index>(i)) = (2.0 / n) * (s.jacobian.transpose() * s.value).transpose();
  }
  return grad;
}

double refine_energy(const PolygonRing& ring, const AttractionField& field, double lambda_ortho) {
  double e = attraction_energy(ring, field);
  if (lambda_ortho != 0.0) e += lambda_ortho * ring_ortho_penalty(ring);
  return e;
}

EnergyRefineResult energy_refine_traced(const PolygonRing& ring, const AttractionField& field,
                                        const RefineConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw ValidationError("energy_refine: lr must be positive");
  if (cfg.iters < 1) throw ValidationError("energy_refine: iters must be at least 1");
  constexpr int kMaxHalvings = 20;

  const bool keep_simple = is_simple(ring);
  PolygonRing current = ring;
  double energy = refine_energy(current, field, cfg.lambda_ortho);
  EnergyRefineResult result{ring, {energy}};
  for (int it = 0; it < cfg.iters; ++it) {
    VertexGradient grad = attraction_energy_grad(current, field);
    if (cfg.lambda_ortho != 0.0) grad += cfg.lambda_ortho * ring_ortho_penalty_grad(current);
    if (grad.squaredNorm() == 0.0) break;

    double step = cfg.lr;
    bool accepted = false;
    PolygonRing candidate = current;
    double candidate_energy = energy;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      for (std::size_t i = 0; i < current.size(); ++i) {
        candidate[i] = current[i] - step * grad.row(static_cast<Eigen::Index>(i)).transpose();
      }
      candidate_energy = refine_energy(candidate, field, cfg.lambda_ortho);
      if (candidate_energy <= energy && (!keep_simple || is_simple(candidate))) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    current = candidate;
    energy = candidate_energy;
    result.energies.push_back(energy);
  }
  result.ring = current;
  return result;
}

PolygonRing energy_refine(const PolygonRing& ring, const AttractionField& field, const RefineConfig& cfg) {
  return energy_refine_traced(ring, field, cfg).ring;
}

namespace {

std::string number(double v) { return fmt::format("{:.17g}", v); }

std::string vector_json(const Eigen::VectorXd& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += number(v(i));
  }
  return out + "]";
}

std::string matrix_json(const Eigen::MatrixXd& m, const std::string& indent) {
  std::string out = "[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out += r ? ",\n" + indent + "  " : "\n" + indent + "  ";
    out += vector_json(m.row(r).transpose());
  }
  return out + "\n" + indent + "]";
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ValidationError(where + ": expected a non-empty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) throw ValidationError(where + ": rows must be non-empty arrays");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw DimensionError(where + ": ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ValidationError(where + ": non-numeric entry");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(where + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

const nlohmann::json& field(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ValidationError(fmt::format("{}: missing field '{}'", where, key));
  return obj.at(key);
}

}  // namespace

std::string weights_to_json(const GcnWeights& weights) {
  std::string out = "{\n  \"layers\": [";
  for (std::size_t i = 0; i < weights.layers.size(); ++i) {
    const GcnLayer& l = weights.layers[i];
    out += i ? ",\n    {\n" : "\n    {\n";
    out += "      \"w_self\": " + matrix_json(l.w_self, "      ") + ",\n";
    out += "      \"w_nbr\": " + matrix_json(l.w_nbr, "      ") + ",\n";
    out += "      \"bias\": " + vector_json(l.bias) + ",\n";
    out += std::string("      \"activation\": \"") + (l.activation == Activation::relu ? "relu" : "identity") +
           "\"\n    }";
  }
  out += weights.layers.empty() ? "],\n" : "\n  ],\n";
  out += "  \"head\": {\n";
  out += "    \"w\": " + matrix_json(weights.head.w, "    ") + ",\n";
  out += "    \"bias\": " + vector_json(weights.head.bias) + "\n";
  out += "  }\n}\n";
  return out;
}

GcnWeights weights_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(fmt::format("weights: parse error at byte {}: {}", e.byte, e.what()));
  }
  GcnWeights w;
  const auto& layers = field(doc, "layers", "weights");
  if (!layers.is_array()) throw ValidationError("weights: 'layers' must be an array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string where = fmt::format("layer {}", i);
    GcnLayer l;
    l.w_self = matrix_from_json(field(layers[i], "w_self", where), where + " w_self");
    l.w_nbr = matrix_from_json(field(layers[i], "w_nbr", where), where + " w_nbr");
    l.bias = vector_from_json(field(layers[i], "bias", where), where + " bias");
    const auto& act = field(layers[i], "activation", where);
    if (act == "relu") {
      l.activation = Activation::relu;
    } else if (act == "identity") {
      l.activation = Activation::identity;
    } else {
      throw ValidationError(where + ": activation must be \"relu\" or \"identity\"");
    }
    w.layers.push_back(std::move(l));
  }
  const auto& head = field(doc, "head", "weights");
  w.head.w = matrix_from_json(field(head, "w", "head"), "head w");
  w.head.bias = vector_from_json(field(head, "bias", "head"), "head bias");
  w.validate();
  return w;
}

void save_weights(const GcnWeights& weights, const std::filesystem::path& path) {
  weights.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out << weights_to_json(weights);
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

GcnWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return weights_from_json(ss.str());
  } catch (const IoError& e) {
    throw IoError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const DimensionError& e) {
    throw DimensionError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace polyfield
