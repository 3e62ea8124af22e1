#include "geofill/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "geofill/error.hpp"
#include "geofill/imgproc.hpp"
#include "geofill/pyramid.hpp"
#include "geofill/render.hpp"
#include "geofill/rng.hpp"

namespace geofill {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNearZ = 1.0;      // closest wall row in the source frame
constexpr double kVerticalExtent = 8.0;
constexpr int kFloorRows = 32;
constexpr int kFloorCols = 32;
constexpr double kVisibleTolerance = 0.01;

double deg2rad(double d) { return d * kPi / 180.0; }

SurfaceShader random_shader(Rng& rng, const Vec3& a, const Vec3& b, double freq) {
  SurfaceShader s;
  s.axis_a = a;
  s.axis_b = b;
  s.freq = freq * rng.uniform(0.8, 1.25);
  for (int c = 0; c < 3; ++c) {
    s.base[c] = rng.uniform(0.3, 0.7);
    s.amplitude[c] = rng.uniform(0.12, 0.25);
    s.phase[c] = rng.uniform(0.0, 2.0 * kPi);
  }
  return s;
}

int add_vertex(SceneGeometry& g, const Vec3& p, int surface) {
  g.vertices.push_back(p);
  g.surface.push_back(surface);
  return static_cast<int>(g.vertices.size()) - 1;
}

// Grid of (rows+1) x (cols+1) vertices from a point function; quads split
// along the same diagonal everywhere.
template <class F>
void add_grid(SceneGeometry& g, int surface, int rows, int cols, F&& point) {
  const int base = static_cast<int>(g.vertices.size());
  for (int i = 0; i <= rows; ++i) {
    for (int j = 0; j <= cols; ++j) add_vertex(g, point(i, j), surface);
  }
  auto id = [&](int i, int j) { return base + i * (cols + 1) + j; };
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      g.triangles.push_back({id(i, j), id(i, j + 1), id(i + 1, j + 1)});
      g.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i + 1, j)});
    }
  }
}

SceneGeometry build_geometry(Rng& rng, const SceneConfig& cfg, const CameraIntrinsics& k) {
  SceneGeometry g;
  const double apex_z = rng.uniform(6.0, 9.0);
  const double apex_x = rng.uniform(-0.8, 0.8);
  const double half_angle = deg2rad(rng.uniform(45.0, 60.0));
  const double tan_h = std::tan(half_angle);
  const bool floor = cfg.n_planes >= 3;
  const bool bump = floor && cfg.heightfield;
  const double floor_y = floor ? rng.uniform(1.4, 2.2) : kVerticalExtent;
  const int rows = bump ? kFloorRows : 1;

  auto z_row = [&](int i) { return kNearZ + (apex_z - kNearZ) * i / rows; };
  auto x_left = [&](double z) { return apex_x - (apex_z - z) * tan_h; };
  auto x_right = [&](double z) { return apex_x + (apex_z - z) * tan_h; };

  const Vec3 up = Vec3::UnitY();
  const Vec3 along_left = Vec3(-std::sin(half_angle), 0.0, -std::cos(half_angle));
  const Vec3 along_right = Vec3(std::sin(half_angle), 0.0, -std::cos(half_angle));
  g.shaders.push_back(random_shader(rng, along_left, up, cfg.texture_freq));
  g.shaders.push_back(random_shader(rng, along_right, up, cfg.texture_freq));

  add_grid(g, 0, rows, 1, [&](int i, int j) {
    const double z = z_row(i);
    return Vec3(x_left(z), j == 0 ? -kVerticalExtent : floor_y, z);
  });
  add_grid(g, 1, rows, 1, [&](int i, int j) {
    const double z = z_row(i);
    return Vec3(x_right(z), j == 0 ? -kVerticalExtent : floor_y, z);
  });

  if (floor) {
    g.shaders.push_back(random_shader(rng, Vec3::UnitX(), Vec3::UnitZ(), cfg.texture_freq));
    double amp = 0.0, bx = 0.0, bz = 0.0, bs = 1.0;
    if (bump) {
      amp = rng.uniform(0.15, 0.3);
      bz = rng.uniform(2.5, apex_z - 1.5);
      bx = apex_x + rng.uniform(-0.3, 0.3) * (x_right(bz) - x_left(bz));
      bs = rng.uniform(1.0, 1.6);
    }
    const int cols = bump ? kFloorCols : 1;
    add_grid(g, 2, rows, cols, [&](int i, int j) {
      const double z = z_row(i);
      const double xl = x_left(z), xr = x_right(z);
      const double x = xl + (xr - xl) * j / cols;
      double y = floor_y;
      if (bump && xr > xl) {
        // Zero at the wall seams so the floor edge stays on the wall bottoms.
        const double half = 0.5 * (xr - xl);
        const double taper = (x - xl) * (xr - x) / (half * half);
        const double d2 = (x - bx) * (x - bx) + (z - bz) * (z - bz);
        y -= amp * taper * std::exp(-0.5 * d2 / (bs * bs));
      }
      return Vec3(x, y, z);
    });
  }

  const int panels = std::max(0, cfg.n_planes - 3);
  for (int p = 0; p < panels; ++p) {
    const double z = rng.uniform(3.0, 5.0);
    const double half_w = 0.5 * cfg.width / k.fx * z, half_h = 0.5 * cfg.height / k.fy * z;
    const Vec3 c(rng.uniform(-0.55, 0.55) * half_w, rng.uniform(-0.5, 0.4) * half_h, z);
    const double yaw = deg2rad(rng.uniform(-35.0, 35.0));
    const double pitch = deg2rad(rng.uniform(-25.0, 25.0));
    const Mat3 r = quaternion_to_matrix(
        quaternion_multiply(axis_angle_quaternion(Vec3::UnitY(), yaw),
                            axis_angle_quaternion(Vec3::UnitX(), pitch)));
    const Vec3 a = r * Vec3::UnitX(), b = r * Vec3::UnitY();
    const double ea = rng.uniform(0.35, 0.7), eb = rng.uniform(0.35, 0.7);
    const int surface = static_cast<int>(g.shaders.size());
    g.shaders.push_back(random_shader(rng, a, b, cfg.texture_freq));
    add_grid(g, surface, 1, 1, [&](int i, int j) {
      return Vec3(c + (j == 0 ? -ea : ea) * a + (i == 0 ? -eb : eb) * b);
    });
  }
  return g;
}

RelativePose random_pose(Rng& rng, const SceneConfig& cfg) {
  const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  const Vec3 axis = Vec3(rng.uniform(-0.3, 0.3), sign, rng.uniform(-0.3, 0.3)).normalized();
  const Vec4 q = axis_angle_quaternion(axis, deg2rad(cfg.rotation_deg));
  const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
  const Vec3 center =
      Vec3(side, rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)).normalized() * cfg.baseline;
  RelativePose pose;
  pose.rotation = q;
  pose.translation = -(quaternion_to_matrix(q) * center);
  pose.canonicalize();
  return pose;
}

// Distance from p to segment ab.
double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

// Zhang-Suen thinning of the set pixels; outside the raster counts as unset.
BinaryMap thin(BinaryMap img) {
  const int w = img.width, h = img.height;
  auto px = [&](int x, int y) -> int {
    return (x < 0 || y < 0 || x >= w || y >= h) ? 0 : img.at(x, y);
  };
  std::vector<std::size_t> remove;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      remove.clear();
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!img.at(x, y)) continue;
          const int p2 = px(x, y - 1), p3 = px(x + 1, y - 1), p4 = px(x + 1, y),
                    p5 = px(x + 1, y + 1), p6 = px(x, y + 1), p7 = px(x - 1, y + 1),
                    p8 = px(x - 1, y), p9 = px(x - 1, y - 1);
          const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
          if (b < 2 || b > 6) continue;
          const int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
          int a = 0;
          for (int i = 0; i < 8; ++i) a += (seq[i] == 0 && seq[i + 1] == 1) ? 1 : 0;
          if (a != 1) continue;
          if (pass == 0 && (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0)) continue;
          if (pass == 1 && (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0)) continue;
          remove.push_back(static_cast<std::size_t>(y) * w + x);
        }
      }
      for (auto i : remove) img.bits[i] = 0;
      changed = changed || !remove.empty();
    }
  }
  return img;
}

}  // namespace

void SceneConfig::validate() const {
  if (width < 16 || height < 16) throw PreconditionError("scene: image must be >= 16x16");
  if (focal < 0.0) throw PreconditionError("scene: focal must be >= 0 (0 = automatic)");
  if (n_planes < 2 || n_planes > 6) throw PreconditionError("scene: n_planes must be in [2, 6]");
  if (!(baseline > 0.0)) throw PreconditionError("scene: baseline must be > 0");
  if (!(rotation_deg >= 0.0 && rotation_deg < 45.0)) {
    throw PreconditionError("scene: rotation must be in [0, 45) degrees");
  }
  if (!(texture_freq > 0.0)) throw PreconditionError("scene: texture frequency must be > 0");
}

std::array<float, 3> SurfaceShader::shade(const Vec3& world) const {
  const double a = axis_a.dot(world), b = axis_b.dot(world);
  const double w = 2.0 * kPi * freq;
  std::array<float, 3> out;
  for (int c = 0; c < 3; ++c) {
    const double v = 0.5 * std::sin(w * a + phase[c]) * std::sin(w * b + 0.7 * phase[c]) +
                     0.3 * std::sin(2.1 * w * (0.8 * a - 0.6 * b) + 1.3 * phase[c]) +
                     0.2 * std::sin(3.3 * w * (0.6 * a + 0.8 * b) + phase[(c + 1) % 3]);
    out[c] = static_cast<float>(std::clamp(base[c] + amplitude[c] * 2.0 * v, 0.0, 1.0));
  }
  return out;
}

RenderedView render_view(const SceneGeometry& geometry, const RelativePose& world_to_camera,
                         const CameraIntrinsics& k, int width, int height) {
  const Mat3 r = world_to_camera.rotation_matrix();
  std::vector<Vec3> cam(geometry.vertices.size());
  std::vector<float> attrs(3 * geometry.vertices.size());
  for (std::size_t i = 0; i < geometry.vertices.size(); ++i) {
    const Vec3& v = geometry.vertices[i];
    cam[i] = r * v + world_to_camera.translation;
    for (int c = 0; c < 3; ++c) attrs[3 * i + c] = static_cast<float>(v[c]);
  }
  const RasterOutput ro = rasterize_attributes(cam, attrs, 3, geometry.triangles, k, width, height);
  RenderedView view{Image(width, height, 3), Image(width, height, 1)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * width + x;
      const int tri = ro.triangle[p];
      if (tri < 0) continue;
      const int surf = geometry.surface[geometry.triangles[tri][0]];
      // Re-derive the world point from the pixel ray and z for full precision.
      const Vec3 pc = ro.depth[p] * k.ray(x, y);
      const Vec3 world = r.transpose() * (pc - world_to_camera.translation);
      const auto rgb = geometry.shaders[surf].shade(world);
      for (int c = 0; c < 3; ++c) view.rgb.at(x, y, c) = rgb[c];
      view.depth.at(x, y) = static_cast<float>(ro.depth[p]);
    }
  }
  return view;
}

double covisible_fraction(const Image& source_depth, const Image& target_depth,
                          const CameraIntrinsics& k, const RelativePose& pose) {
  const int w = source_depth.width(), h = source_depth.height();
  const int tw = target_depth.width(), th = target_depth.height();
  std::size_t visible = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = source_depth.at(x, y);
      if (!(d > 0.0)) continue;
      const Vec3 p = pose.transform(d * k.ray(x, y));
      if (!(p.z() > 0.0)) continue;
      const Vec2 uv = k.project(p);
      const int u = static_cast<int>(std::lround(uv.x())), v = static_cast<int>(std::lround(uv.y()));
      if (u < 0 || v < 0 || u >= tw || v >= th) continue;
      if (std::abs(target_depth.at(u, v) - p.z()) <= kVisibleTolerance * p.z()) ++visible;
    }
  }
  return static_cast<double>(visible) / static_cast<double>(source_depth.pixel_count());
}

BinaryMap target_visible_in_source(const SyntheticScene& scene) {
  const int w = scene.target.width(), h = scene.target.height();
  const int sw = scene.source.width(), sh = scene.source.height();
  const CameraIntrinsics& k = scene.intrinsics;
  const Mat3 rt = scene.pose.rotation_matrix().transpose();
  BinaryMap out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = scene.target_depth.at(x, y);
      if (!(d > 0.0)) continue;
      const Vec3 p = rt * (d * k.ray(x, y) - scene.pose.translation);
      if (!(p.z() > 0.0)) continue;
      const Vec2 uv = k.project(p);
      const int u = static_cast<int>(std::lround(uv.x())), v = static_cast<int>(std::lround(uv.y()));
      if (u < 0 || v < 0 || u >= sw || v >= sh) continue;
      if (std::abs(scene.source_depth.at(u, v) - p.z()) <= kVisibleTolerance * p.z()) out.at(x, y) = 1;
    }
  }
  return out;
}

SyntheticScene generate_scene(std::uint64_t seed, const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(seed);
  SyntheticScene s;
  s.seed = seed;
  s.config = cfg;
  s.intrinsics = CameraIntrinsics::centered(cfg.width, cfg.height,
                                            cfg.focal > 0.0 ? cfg.focal : 0.8 * cfg.width);
  s.geometry = build_geometry(rng, cfg, s.intrinsics);
  s.pose = random_pose(rng, cfg);
  RenderedView src = render_view(s.geometry, RelativePose::identity(), s.intrinsics, cfg.width,
                                 cfg.height);
  RenderedView tgt = render_view(s.geometry, s.pose, s.intrinsics, cfg.width, cfg.height);
  for (const Image* d : {&src.depth, &tgt.depth}) {
    for (float v : d->data()) {
      if (!(v > 0.0f)) throw DegenerateError("scene: geometry leaves pixels uncovered");
    }
  }
  s.source = std::move(src.rgb);
  s.source_depth = std::move(src.depth);
  s.target = std::move(tgt.rgb);
  s.target_depth = std::move(tgt.depth);
  s.covisible_fraction = covisible_fraction(s.source_depth, s.target_depth, s.intrinsics, s.pose);
  if (s.covisible_fraction < 0.3) {
    throw DegenerateError("scene: only " + std::to_string(100.0 * s.covisible_fraction) +
                          "% of the source is visible in the target (need >= 30%)");
  }
  return s;
}

LabeledCorrespondences sample_correspondences(const SyntheticScene& scene, int n, double noise_px,
                                              double outlier_frac, std::uint64_t seed,
                                              const HoleMask* target_mask) {
  if (n < 8) throw PreconditionError("correspondences: need n >= 8");
  if (!(outlier_frac >= 0.0 && outlier_frac <= 1.0) || noise_px < 0.0) {
    throw PreconditionError("correspondences: outlier fraction in [0,1], noise >= 0");
  }
  Rng rng(seed);
  const int w = scene.source.width(), h = scene.source.height();
  const int tw = scene.target.width(), th = scene.target.height();
  const CameraIntrinsics& k = scene.intrinsics;
  auto in_hole = [&](double x, double y) {
    if (!target_mask) return false;
    return target_mask->is_hole(static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y)));
  };
  auto in_target = [&](double x, double y) {
    return x >= 0.0 && y >= 0.0 && x <= tw - 1 && y <= th - 1;
  };

  LabeledCorrespondences out;
  const long max_attempts = 1000L * n;
  long attempts = 0;
  while (static_cast<int>(out.set.size()) < n) {
    if (++attempts > max_attempts) {
      throw DegenerateError("correspondences: not enough co-visible surface");
    }
    const int xs = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
    const int ys = static_cast<int>(rng.below(static_cast<std::uint64_t>(h)));
    const Vec3 p = scene.pose.transform(scene.source_depth.at(xs, ys) * k.ray(xs, ys));
    if (!(p.z() > 0.0)) continue;
    const Vec2 uv = k.project(p);
    const int u = static_cast<int>(std::lround(uv.x())), v = static_cast<int>(std::lround(uv.y()));
    if (u < 0 || v < 0 || u >= tw || v >= th) continue;
    if (std::abs(scene.target_depth.at(u, v) - p.z()) > kVisibleTolerance * p.z()) continue;
    const double xt = uv.x() + noise_px * rng.normal();
    const double yt = uv.y() + noise_px * rng.normal();
    if (!in_target(xt, yt) || in_hole(xt, yt)) continue;
    out.set.push_back({static_cast<double>(xs), static_cast<double>(ys), xt, yt});
  }
  out.outlier.assign(static_cast<std::size_t>(n), false);
  const int n_out = static_cast<int>(std::lround(n * outlier_frac));
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < n_out; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
    auto& c = out.set.pairs[static_cast<std::size_t>(idx[i])];
    do {
      c.xt = rng.uniform(0.0, tw - 1.0);
      c.yt = rng.uniform(0.0, th - 1.0);
    } while (in_hole(c.xt, c.yt));
    out.outlier[static_cast<std::size_t>(idx[i])] = true;
  }
  return out;
}

HoleMask generate_stroke_mask(int width, int height, int n_strokes, double width_px,
                              std::uint64_t seed) {
  if (!(width_px >= 1.0)) throw PreconditionError("stroke width must be >= 1 px");
  if (n_strokes < 0) throw PreconditionError("stroke count must be >= 0");
  HoleMask mask(width, height);
  Rng rng(seed);
  const double radius = 0.5 * width_px;
  for (int s = 0; s < n_strokes; ++s) {
    const int n_vertices = 4 + static_cast<int>(rng.below(9));
    std::vector<Vec2> poly;
    Vec2 p(rng.uniform(0.0, width - 1.0), rng.uniform(0.0, height - 1.0));
    double angle = rng.uniform(0.0, 2.0 * kPi);
    poly.push_back(p);
    for (int i = 1; i < n_vertices; ++i) {
      angle += rng.uniform(-kPi / 4.0, kPi / 4.0);
      const double step = width_px * rng.uniform(0.5, 1.0);
      Vec2 q = p + step * Vec2(std::cos(angle), std::sin(angle));
      // Reflect off the borders so the walk stays inside the raster.
      if (q.x() < 0.0 || q.x() > width - 1.0) {
        angle = kPi - angle;
        q.x() = std::clamp(2.0 * std::clamp(q.x(), 0.0, width - 1.0) - q.x(), 0.0, width - 1.0);
      }
      if (q.y() < 0.0 || q.y() > height - 1.0) {
        angle = -angle;
        q.y() = std::clamp(2.0 * std::clamp(q.y(), 0.0, height - 1.0) - q.y(), 0.0, height - 1.0);
      }
      poly.push_back(q);
      p = q;
    }
    for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
      const Vec2 a = poly[i], b = poly[i + 1];
      const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x(), b.x()) - radius)));
      const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(a.x(), b.x()) + radius)));
      const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y(), b.y()) - radius)));
      const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(a.y(), b.y()) + radius)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (segment_distance(Vec2(x, y), a, b) <= radius) mask.set(x, y, 0.0f);
        }
      }
    }
  }
  return mask;
}

double measure_stroke_width(const HoleMask& mask) {
  const int w = mask.width(), h = mask.height();
  BinaryMap hole(w, h), known(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      hole.at(x, y) = mask.is_hole(x, y) ? 1 : 0;
      known.at(x, y) = mask.is_hole(x, y) ? 0 : 1;
    }
  }
  if (hole.count() == 0 || known.count() == 0) return 0.0;
  const BinaryMap skeleton = thin(hole);
  const Image dist = euclidean_distance(known);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < skeleton.bits.size(); ++i) {
    if (!skeleton.bits[i]) continue;
    // Center-to-center distance exceeds the distance to the pixel edge by 0.5.
    sum += dist.data()[i] - 0.5;
    ++n;
  }
  return n ? 2.0 * sum / static_cast<double>(n) : 0.0;
}

Image perturb_depth(const Image& gt_depth, const DepthPerturbation& p) {
  if (gt_depth.channels() != 1) throw PreconditionError("perturb_depth: expects 1 channel");
  for (float v : gt_depth.data()) {
    if (!(v > 0.0f)) throw PreconditionError("perturb_depth: ground-truth depth must be positive");
  }
  if (p.blur_radius < 0 || p.noise_sigma < 0.0) {
    throw PreconditionError("perturb_depth: blur radius and noise must be >= 0");
  }
  Image out = gt_depth;
  const int w = out.width(), h = out.height();
  if (p.blur_radius > 0) {
    const int r = p.blur_radius;
    const double inv = 1.0 / (2 * r + 1);
    Image tmp(w, h, 1);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += out.at(reflect101(x + i, w), y);
        tmp.at(x, y) = static_cast<float>(acc * inv);
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += tmp.at(x, reflect101(y + i, h));
        out.at(x, y) = static_cast<float>(acc * inv);
      }
    }
  }
  if (p.noise_sigma > 0.0) {
    Rng rng(p.seed);
    for (auto& v : out.data()) v = static_cast<float>(v * (1.0 + p.noise_sigma * rng.normal()));
  }
  if (p.scale != 1.0 || p.offset != 0.0) {
    for (auto& v : out.data()) v = static_cast<float>(p.scale * v + p.offset);
  }
  bool any_positive = false;
  for (float v : out.data()) any_positive = any_positive || v > 0.0f;
  if (!any_positive) throw PreconditionError("perturb_depth: result has no positive depth");
  return out;
}

}  // namespace geofill
