#include "geofill/weights.hpp"

#include <cmath>

#include "geofill/error.hpp"
#include "geofill/imgproc.hpp"

namespace geofill {

double hole_weight(double distance, double sigma) {
  return std::exp(-distance * distance / (2.0 * sigma * sigma));
}

Image hole_distance_weights(const HoleMask& mask, double sigma) {
  if (!(sigma > 0.0)) throw PreconditionError("hole weighting sigma must be positive");
  const int w = mask.width(), h = mask.height();
  Image out(w, h, 1, 1.0f);
  if (!mask.has_hole()) return out;
  BinaryMap seeds(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.is_hole(x, y)) continue;
      const bool border = (x > 0 && mask.is_hole(x - 1, y)) || (x + 1 < w && mask.is_hole(x + 1, y)) ||
                          (y > 0 && mask.is_hole(x, y - 1)) || (y + 1 < h && mask.is_hole(x, y + 1));
      if (border) seeds.at(x, y) = 1;
    }
  }
  const Image dist = euclidean_distance(seeds);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.is_hole(x, y)) {
        out.at(x, y) = 0.0f;
        continue;
      }
      out.at(x, y) = static_cast<float>(hole_weight(dist.at(x, y), sigma));
    }
  }
  return out;
}

Image edge_weights(const Image& target, int n_scales, int dilate, const HoleMask* known) {
  if (n_scales < 1) throw PreconditionError("edge weighting needs >= 1 scale");
  const Image gray = to_gray(target);
  const int w = gray.width(), h = gray.height();
  BinaryMap region;
  if (known) {
    if (known->width() != w || known->height() != h) {
      throw PreconditionError("edge weighting: mask and target dimensions differ");
    }
    region = BinaryMap(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) region.at(x, y) = known->is_hole(x, y) ? 0 : 1;
    }
  }
  std::vector<double> acc(gray.pixel_count(), 0.0);
  bool any = false;
  for (int k = 1; k <= n_scales; ++k) {
    const double sigma = 0.8 * std::ldexp(1.0, k - 1);
    const Image blurred =
        known ? normalized_blur(gray, known->values(), sigma) : gaussian_blur(gray, sigma);
    const CannyResult edges = canny(blurred, 70.0, 90.0, region);
    const BinaryMap band = dilate_square(edges.edges, dilate);
    const std::size_t mass = band.count();
    if (mass == 0) continue;
    any = true;
    const double inv = 1.0 / static_cast<double>(mass);
    for (std::size_t i = 0; i < acc.size(); ++i) {
      if (band.bits[i]) acc[i] += inv;
    }
  }
  Image out(w, h, 1);
  if (!any) {
    const float u = static_cast<float>(1.0 / static_cast<double>(gray.pixel_count()));
    for (auto& x : out.data()) x = u;
    return out;
  }
  for (std::size_t i = 0; i < acc.size(); ++i) out.data()[i] = static_cast<float>(acc[i]);
  return out;
}

WeightMap build_weight_map(const Image& target, const HoleMask& mask, const WeightOptions& opt) {
  if (target.width() != mask.width() || target.height() != mask.height()) {
    throw PreconditionError("weight map: target and mask dimensions differ");
  }
  WeightMap wm;
  const int w = target.width(), h = target.height();
  wm.w_h = opt.use_hole_weight ? hole_distance_weights(mask, opt.sigma_hole) : Image(w, h, 1, 1.0f);
  wm.w_e = opt.use_edge_weight ? edge_weights(target, opt.edge_scales, opt.edge_dilation, &mask)
                               : Image(w, h, 1, 1.0f);
  wm.w = Image(w, h, 1);
  for (std::size_t i = 0; i < wm.w.data().size(); ++i) {
    wm.w.data()[i] = wm.w_h.data()[i] * wm.w_e.data()[i];
  }
  return wm;
}

}  // namespace geofill
