#include "polyfield/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "polyfield/afm.hpp"
#include "polyfield/losses.hpp"
#include "polyfield/refine.hpp"

namespace polyfield {

Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                 double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + h;
    const double up = f(probe);
    probe[k] = x[k] - h;
    const double down = f(probe);
    probe[k] = x[k];
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

double gradient_rel_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  const double scale = std::max(analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff());
  if (scale == 0.0) return 0.0;
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Keeps a coordinate away from the cell-center lines where bilinear sampling has kinks.
double off_kink(double v) {
  const double frac = v - 0.5 - std::floor(v - 0.5);
  if (frac < 1e-3 || frac > 1.0 - 1e-3) return v + 0.01;
  return v;
}

PolygonRing random_star(Rng& rng, const Point2& center, double r_min, double r_max) {
  const int n = std::uniform_int_distribution<int>(3, 12)(rng);
  std::vector<Point2> v;
  for (int i = 0; i < n; ++i) {
    const double theta = 2.0 * std::numbers::pi * (i + uniform(rng, 0.1, 0.9)) / n;
    const double r = uniform(rng, r_min, r_max);
    v.emplace_back(off_kink(center.x() + r * std::cos(theta)), off_kink(center.y() + r * std::sin(theta)));
  }
  return PolygonRing(std::move(v));
}

Eigen::VectorXd flatten(const PolygonRing& ring) {
  Eigen::VectorXd x(2 * static_cast<Eigen::Index>(ring.size()));
  for (std::size_t i = 0; i < ring.size(); ++i) x.segment<2>(2 * static_cast<Eigen::Index>(i)) = ring[i];
  return x;
}

PolygonRing unflatten(const Eigen::VectorXd& x) {
  std::vector<Point2> v;
  for (Eigen::Index i = 0; i < x.size() / 2; ++i) v.emplace_back(x[2 * i], x[2 * i + 1]);
  return PolygonRing(std::move(v));
}

Eigen::VectorXd flatten(const VertexGradient& g) {
  Eigen::VectorXd x(g.size());
  for (Eigen::Index i = 0; i < g.rows(); ++i) x.segment<2>(2 * i) = g.row(i).transpose();
  return x;
}

AttractionField random_field(Rng& rng, int h, int w, double scale) {
  AttractionField f(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) f.set(r, c, {uniform(rng, -scale, scale), uniform(rng, -scale, scale)});
  }
  return f;
}

Eigen::VectorXd field_vector(const AttractionField& f) {
  Eigen::VectorXd x(2 * f.dx().size());
  for (Eigen::Index i = 0; i < f.dx().size(); ++i) {
    x[2 * i] = f.dx().data()[i];
    x[2 * i + 1] = f.dy().data()[i];
  }
  return x;
}

AttractionField field_from_vector(const Eigen::VectorXd& x, int h, int w) {
  AttractionField f(h, w);
  for (Eigen::Index i = 0; i < f.dx().size(); ++i) {
    f.dx().data()[i] = x[2 * i];
    f.dy().data()[i] = x[2 * i + 1];
  }
  return f;
}

template <typename Check>
GradCheckResult run(const std::string& name, const GradCheckConfig& cfg, Rng& rng, Check&& check) {
  GradCheckResult res{name, cfg.instances, 0.0, true};
  for (int i = 0; i < cfg.instances; ++i) res.max_rel_error = std::max(res.max_rel_error, check(rng));
  res.passed = res.max_rel_error < cfg.tolerance;
  return res;
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckConfig& cfg) {
  Rng rng(cfg.seed);
  const double h = cfg.step;
  std::vector<GradCheckResult> out;

  out.push_back(run("mask_bce", cfg, rng, [&](Rng& g) {
    constexpr int kH = 12, kW = 12;
    GridArray<double> p(kH, kW);
    GridArray<std::uint8_t> bits(kH, kW);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      p.data()[i] = uniform(g, 0.05, 0.95);
      bits.data()[i] = uniform(g, 0.0, 1.0) < 0.5 ? 1 : 0;
    }
    const BinaryMask gt(bits);
    const GridArray<double> grad = mask_bce_grad(ProbGrid(p), gt);
    auto f = [&](const Eigen::VectorXd& x) {
      return mask_bce(ProbGrid(GridArray<double>(Eigen::Map<const GridArray<double>>(x.data(), kH, kW))), gt);
    };
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(p.data(), p.size());
    const Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(grad.data(), grad.size());
    return gradient_rel_error(a, numeric_gradient(f, x, h));
  }));

  for (AfmLossMode mode : {AfmLossMode::sq_l2, AfmLossMode::l1}) {
    const std::string name = mode == AfmLossMode::sq_l2 ? "afm_loss_sq_l2" : "afm_loss_l1";
    out.push_back(run(name, cfg, rng, [&](Rng& g) {
      constexpr int kH = 10, kW = 10;
      const AttractionField gt = random_field(g, kH, kW, 3.0);
      AttractionField pred = random_field(g, kH, kW, 3.0);
      // Keep every residual away from the l1 kink.
      for (Eigen::Index i = 0; i < pred.dx().size(); ++i) {
        for (auto* arr : {&pred.dx(), &pred.dy()}) {
          const auto* ref = arr == &pred.dx() ? &gt.dx() : &gt.dy();
          if (std::abs(arr->data()[i] - ref->data()[i]) < 1e-2) arr->data()[i] = ref->data()[i] + 0.5;
        }
      }
      const Eigen::VectorXd a = field_vector(afm_loss_grad(pred, gt, mode));
      auto f = [&](const Eigen::VectorXd& x) { return afm_loss(field_from_vector(x, kH, kW), gt, mode); };
      return gradient_rel_error(a, numeric_gradient(f, field_vector(pred), h));
    }));
  }

  out.push_back(run("ortho_loss", cfg, rng, [&](Rng& g) {
    const std::vector<PolygonRing> rings{random_star(g, {0.0, 0.0}, 2.0, 8.0), random_star(g, {30.0, 5.0}, 2.0, 8.0)};
    const std::vector<VertexGradient> grads = ortho_loss_grad(rings);
    const Eigen::Index n0 = 2 * static_cast<Eigen::Index>(rings[0].size());
    Eigen::VectorXd x(n0 + 2 * static_cast<Eigen::Index>(rings[1].size()));
    x << flatten(rings[0]), flatten(rings[1]);
    Eigen::VectorXd a(x.size());
    a << flatten(grads[0]), flatten(grads[1]);
    auto f = [&](const Eigen::VectorXd& v) {
      const std::vector<PolygonRing> rs{unflatten(v.head(n0)), unflatten(v.tail(v.size() - n0))};
      return ortho_loss(rs);
    };
    return gradient_rel_error(a, numeric_gradient(f, x, h));
  }));

  out.push_back(run("attraction_energy", cfg, rng, [&](Rng& g) {
    const AttractionField field = random_field(g, 24, 24, 4.0);
    const PolygonRing ring = random_star(g, {12.0, 12.0}, 3.0, 9.0);
    const Eigen::VectorXd a = flatten(VertexGradient(attraction_energy_grad(ring, field)));
    auto f = [&](const Eigen::VectorXd& x) { return attraction_energy(unflatten(x), field); };
    return gradient_rel_error(a, numeric_gradient(f, flatten(ring), h));
  }));

  out.push_back(run("refine_energy", cfg, rng, [&](Rng& g) {
    const AttractionField field = random_field(g, 24, 24, 4.0);
    const PolygonRing ring = random_star(g, {12.0, 12.0}, 3.0, 9.0);
    const double lambda = uniform(g, 0.1, 2.0);
    const VertexGradient grad =
        VertexGradient(attraction_energy_grad(ring, field)) + lambda * ring_ortho_penalty_grad(ring);
    auto f = [&](const Eigen::VectorXd& x) { return refine_energy(unflatten(x), field, lambda); };
    return gradient_rel_error(flatten(grad), numeric_gradient(f, flatten(ring), h));
  }));

  return out;
}

}  // namespace polyfield
