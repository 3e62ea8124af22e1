#include "geofill/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "geofill/error.hpp"
#include "geofill/pyramid.hpp"

namespace geofill {

std::size_t BinaryMap::count() const noexcept {
  std::size_t n = 0;
  for (auto b : bits) n += b ? 1 : 0;
  return n;
}

namespace {

// Stand-in for "no seed"; large enough to dominate any in-image distance and
// finite so the envelope arithmetic stays ordered.
constexpr double kFar = 1e20;

// 1-D squared distance transform of f (lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  auto cross = [&](int q, int p) {
    return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
  };
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = cross(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = cross(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

std::vector<double> gaussian_kernel(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + r];
  }
  for (auto& x : k) x /= sum;
  return k;
}

}  // namespace

Image euclidean_distance(const BinaryMap& seeds) {
  const int w = seeds.width, h = seeds.height;
  Image out(w, h, 1);
  if (seeds.count() == 0) {
    for (auto& x : out.data()) x = std::numeric_limits<float>::infinity();
    return out;
  }
  const int n = std::max(w, h);
  std::vector<double> f, d, z(static_cast<std::size_t>(n) + 2);
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> cols(static_cast<std::size_t>(w) * h);
  f.resize(h);
  d.resize(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = seeds.at(x, y) ? 0.0 : kFar;
    edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) cols[static_cast<std::size_t>(y) * w + x] = d[y];
  }
  f.resize(w);
  d.resize(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = cols[static_cast<std::size_t>(y) * w + x];
    edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) out.at(x, y) = static_cast<float>(std::sqrt(d[x]));
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0 || img.empty()) return img;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width(), h = img.height(), ch = img.channels();
  std::vector<double> tmp(img.data().size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * img.at(reflect101(x + i, w), y, c);
        tmp[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
      }
    }
  }
  Image out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) {
          acc += k[i + r] * tmp[(static_cast<std::size_t>(reflect101(y + i, h)) * w + x) * ch + c];
        }
        out.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Image normalized_blur(const Image& img, const Image& weight, double sigma) {
  if (img.channels() != 1 || weight.channels() != 1 || !img.same_dims(weight)) {
    throw PreconditionError("normalized_blur: expects matching 1-channel rasters");
  }
  Image masked(img.width(), img.height(), 1);
  for (std::size_t i = 0; i < img.data().size(); ++i) {
    masked.data()[i] = img.data()[i] * weight.data()[i];
  }
  const Image num = gaussian_blur(masked, sigma);
  const Image den = gaussian_blur(weight, sigma);
  Image out(img.width(), img.height(), 1);
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    out.data()[i] = den.data()[i] > 1e-6f ? num.data()[i] / den.data()[i] : 0.0f;
  }
  return out;
}

BinaryMap dilate_square(const BinaryMap& in, int size) {
  if (size <= 1) return in;
  const int lo = -(size / 2), hi = (size - 1) / 2;
  const int w = in.width, h = in.height;
  // Separable: max filter along rows, then along columns. A source pixel at
  // offset o from the output covers it when o is in [lo, hi], i.e. the
  // output collects inputs at x - hi .. x - lo.
  BinaryMap rows(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t m = 0;
      for (int o = -hi; o <= -lo && !m; ++o) {
        const int xx = x + o;
        if (xx >= 0 && xx < w) m = in.at(xx, y);
      }
      rows.at(x, y) = m;
    }
  }
  BinaryMap out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t m = 0;
      for (int o = -hi; o <= -lo && !m; ++o) {
        const int yy = y + o;
        if (yy >= 0 && yy < h) m = rows.at(x, yy);
      }
      out.at(x, y) = m;
    }
  }
  return out;
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw PreconditionError("percentile of an empty set");
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   values.end());
  return values[rank - 1];
}

CannyResult canny(const Image& gray, double low_percentile, double high_percentile,
                  const BinaryMap& region, double min_magnitude) {
  if (gray.channels() != 1) throw PreconditionError("canny: expects a 1-channel image");
  const int w = gray.width(), h = gray.height();
  std::vector<double> gx(static_cast<std::size_t>(w) * h), gy(gx.size()), mag(gx.size());
  auto g = [&](int x, int y) -> double { return gray.at(reflect101(x, w), reflect101(y, h)); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = (g(x + 1, y - 1) + 2 * g(x + 1, y) + g(x + 1, y + 1)) -
                        (g(x - 1, y - 1) + 2 * g(x - 1, y) + g(x - 1, y + 1));
      const double sy = (g(x - 1, y + 1) + 2 * g(x, y + 1) + g(x + 1, y + 1)) -
                        (g(x - 1, y - 1) + 2 * g(x, y - 1) + g(x + 1, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx[i] = sx;
      gy[i] = sy;
      mag[i] = std::hypot(sx, sy);
    }
  }
  const bool use_region = !region.bits.empty();
  std::vector<double> sample;
  sample.reserve(mag.size());
  for (std::size_t i = 0; i < mag.size(); ++i) {
    if (!use_region || region.bits[i]) sample.push_back(mag[i]);
  }
  CannyResult out;
  out.edges = BinaryMap(w, h);
  if (sample.empty()) return out;
  out.low_threshold = std::max(percentile(sample, low_percentile), min_magnitude);
  out.high_threshold = std::max(percentile(sample, high_percentile), min_magnitude);

  auto m = [&](int x, int y) -> double {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
    return mag[static_cast<std::size_t>(y) * w + x];
  };
  constexpr double kTan22 = 0.41421356237309503;
  constexpr double kTan67 = 2.414213562373095;
  // 0 = not edge, 1 = weak, 2 = strong
  std::vector<std::uint8_t> cls(mag.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (use_region && !region.bits[i]) continue;
      const double a = mag[i];
      if (a < out.low_threshold) continue;
      const double ax = std::abs(gx[i]), ay = std::abs(gy[i]);
      double n1, n2;
      if (ay <= kTan22 * ax) {
        n1 = m(x - 1, y);
        n2 = m(x + 1, y);
      } else if (ay >= kTan67 * ax) {
        n1 = m(x, y - 1);
        n2 = m(x, y + 1);
      } else if (gx[i] * gy[i] > 0) {
        n1 = m(x - 1, y - 1);
        n2 = m(x + 1, y + 1);
      } else {
        n1 = m(x + 1, y - 1);
        n2 = m(x - 1, y + 1);
      }
      // Ties resolve toward the lower-index neighbor so plateaus stay thin.
      if (!(a > n1 && a >= n2)) continue;
      cls[i] = a >= out.high_threshold ? 2 : 1;
    }
  }
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (cls[i] == 2) {
      out.edges.bits[i] = 1;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int xx = x + dx, yy = y + dy;
        if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
        const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
        if (cls[j] == 1 && !out.edges.bits[j]) {
          out.edges.bits[j] = 1;
          stack.push_back(j);
        }
      }
    }
  }
  return out;
}

}  // namespace geofill
