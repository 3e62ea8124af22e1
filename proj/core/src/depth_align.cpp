#include "geofill/depth_align.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "geofill/error.hpp"

namespace geofill {

ScaleOffset fit_scale_offset(const Image& raw, const SparseDepthMap& sparse) {
  const auto& samples = sparse.samples;
  if (samples.size() < 2) {
    throw PreconditionError("scale/offset fit needs >= 2 sparse samples, got " +
                            std::to_string(samples.size()));
  }
  if (raw.channels() != 1) throw PreconditionError("raw depth must have 1 channel");

  // Nearest-rank 90th percentile; residual ties at the cutoff are kept.
  std::vector<double> residuals;
  residuals.reserve(samples.size());
  for (const auto& s : samples) residuals.push_back(s.residual);
  std::sort(residuals.begin(), residuals.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(residuals.size())));
  const double cutoff = residuals[std::max<std::size_t>(rank, 1) - 1];

  std::vector<double> xs, ys;
  for (const auto& s : samples) {
    if (s.residual > cutoff) continue;
    xs.push_back(raw.sample_bilinear(s.x, s.y));
    ys.push_back(s.depth);
  }
  if (xs.size() < 2) {
    throw PreconditionError("scale/offset fit has < 2 samples after residual filtering");
  }

  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx / n < 1e-12) {
    throw DegenerateError("scale/offset fit is degenerate: sampled raw depth is constant");
  }
  ScaleOffset out;
  out.scale = sxy / sxx;
  out.offset = my - out.scale * mx;
  out.samples_used = xs.size();
  return out;
}

}  // namespace geofill
