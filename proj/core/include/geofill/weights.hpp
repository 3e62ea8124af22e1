#pragma once

#include "geofill/image.hpp"

namespace geofill {

/// Per-pixel loss importance at target resolution, W = W_h * W_e.
struct WeightMap {
  Image w;
  Image w_h;
  Image w_e;
};

/// exp(-d^2 / (2 sigma^2)).
double hole_weight(double distance, double sigma);

/// hole_weight(d, sigma) where d is the Euclidean distance from a known
/// pixel to the nearest known pixel bordering the hole; 0 inside the hole,
/// 1 everywhere when the mask has no hole.
Image hole_distance_weights(const HoleMask& mask, double sigma);

/// Sum over scales k = 1..n_scales of the mass-normalized, dilated Canny map
/// of the target blurred with std 0.8 * 2^(k-1). When `known` is given, the
/// blur is normalized over known pixels and edges inside the hole are
/// discarded. Uniform 1/(H*W) when no scale finds an edge.
Image edge_weights(const Image& target, int n_scales, int dilate, const HoleMask* known = nullptr);

struct WeightOptions {
  double sigma_hole = 192.0;
  int edge_scales = 4;
  int edge_dilation = 4;
  bool use_hole_weight = true;
  bool use_edge_weight = true;
};

/// Disabled components are replaced by all-ones maps.
WeightMap build_weight_map(const Image& target, const HoleMask& mask, const WeightOptions& opt);

}  // namespace geofill
