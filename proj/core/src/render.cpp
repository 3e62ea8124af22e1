#include "geofill/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "geofill/error.hpp"
#include "geofill/parallel.hpp"

namespace geofill {

namespace {

constexpr int kBandRows = 16;

struct ClipVertex {
  Vec3 p;
  std::vector<double> attr;
};

struct ScreenTriangle {
  int id = 0;
  double u[3], v[3], w[3];     // screen position and 1/z
  std::vector<double> attr_w;  // attr_dim per vertex, premultiplied by 1/z
  int y_min = 0, y_max = 0;
};

// Edge a->b owns pixels exactly on it when it points down, or left when
// horizontal. Reversed edges get the opposite answer, so a shared edge's
// samples go to exactly one of its triangles.
bool owns_edge(double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  return dy > 0.0 || (dy == 0.0 && dx < 0.0);
}

double edge_fn(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

ClipVertex make_vertex(const std::vector<Vec3>& pts, const std::vector<float>& attrs, int dim,
                       int i) {
  ClipVertex cv{pts[static_cast<std::size_t>(i)], std::vector<double>(static_cast<std::size_t>(dim))};
  for (int a = 0; a < dim; ++a) cv.attr[a] = attrs[static_cast<std::size_t>(i) * dim + a];
  return cv;
}

// Intersection with z = near, computed from the lower-index endpoint so both
// triangles sharing an edge produce the same point.
ClipVertex intersect(const ClipVertex& a, int ia, const ClipVertex& b, int ib, double near) {
  const ClipVertex& lo = ia < ib ? a : b;
  const ClipVertex& hi = ia < ib ? b : a;
  const double t = (near - lo.p.z()) / (hi.p.z() - lo.p.z());
  ClipVertex out{lo.p + t * (hi.p - lo.p), lo.attr};
  for (std::size_t k = 0; k < out.attr.size(); ++k) out.attr[k] += t * (hi.attr[k] - lo.attr[k]);
  out.p.z() = near;
  return out;
}

}  // namespace

TexturedMesh build_mesh(const Image& src, const DepthState& depth, const CameraIntrinsics& k,
                        GridDiagonal diagonal) {
  if (src.channels() != 3) throw PreconditionError("build_mesh: source must be RGB");
  if (!src.same_dims(depth.raw)) throw PreconditionError("build_mesh: depth/source size mismatch");
  TexturedMesh mesh;
  const int w = src.width(), h = src.height();
  mesh.grid_width = w;
  mesh.grid_height = h;
  const std::size_t n = src.pixel_count();
  mesh.vertices.resize(n);
  mesh.colors.resize(n);
  mesh.depth.resize(n);
  mesh.vertex_valid.assign(n, 0);
  std::size_t valid = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = mesh.vertex_index(x, y);
      const double d = depth.effective(x, y);
      mesh.depth[i] = d;
      mesh.colors[i] = {src.at(x, y, 0), src.at(x, y, 1), src.at(x, y, 2)};
      if (d > 0.0 && std::isfinite(d)) {
        mesh.vertices[i] = d * k.ray(x, y);
        mesh.vertex_valid[i] = 1;
        ++valid;
      } else {
        mesh.vertices[i] = Vec3::Zero();
      }
    }
  }
  if (valid < 3) throw DegenerateError("build_mesh: fewer than 3 vertices with positive depth");
  mesh.triangles.reserve(2 * static_cast<std::size_t>(std::max(w - 1, 0)) * std::max(h - 1, 0));
  auto add = [&](int a, int b, int c) {
    if (mesh.vertex_valid[a] && mesh.vertex_valid[b] && mesh.vertex_valid[c]) {
      mesh.triangles.push_back({a, b, c});
    }
  };
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      const int tl = mesh.vertex_index(x, y), tr = mesh.vertex_index(x + 1, y);
      const int bl = mesh.vertex_index(x, y + 1), br = mesh.vertex_index(x + 1, y + 1);
      if (diagonal == GridDiagonal::kTopLeftToBottomRight) {
        add(tl, tr, br);
        add(tl, br, bl);
      } else {
        add(tl, tr, bl);
        add(tr, br, bl);
      }
    }
  }
  return mesh;
}

double edge_drop_ratio(double di, double dj) noexcept {
  return 2.0 * std::abs(di - dj) / (di + dj);
}

TexturedMesh drop_edges(const TexturedMesh& mesh, double eps_edge) {
  TexturedMesh out = mesh;
  out.triangles.clear();
  for (const auto& t : mesh.triangles) {
    const double d0 = mesh.depth[t[0]], d1 = mesh.depth[t[1]], d2 = mesh.depth[t[2]];
    if (edge_drop_ratio(d0, d1) > eps_edge || edge_drop_ratio(d1, d2) > eps_edge ||
        edge_drop_ratio(d2, d0) > eps_edge) {
      continue;
    }
    out.triangles.push_back(t);
  }
  return out;
}

RasterOutput rasterize_attributes(const std::vector<Vec3>& camera_points,
                                  const std::vector<float>& attrs, int attr_dim,
                                  const std::vector<std::array<int, 3>>& triangles,
                                  const CameraIntrinsics& k, int width, int height, double near) {
  if (attr_dim < 0 || attrs.size() != camera_points.size() * static_cast<std::size_t>(attr_dim)) {
    throw PreconditionError("rasterize: attribute array does not match the vertex count");
  }
  RasterOutput out;
  out.width = width;
  out.height = height;
  out.attr_dim = attr_dim;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  out.attrs.assign(n * attr_dim, 0.0f);
  out.depth.assign(n, std::numeric_limits<double>::infinity());
  out.triangle.assign(n, -1);

  const int n_bands = block_count(height, kBandRows);
  std::vector<ScreenTriangle> screen;
  std::vector<std::vector<int>> bins(static_cast<std::size_t>(n_bands));

  auto emit = [&](int id, const ClipVertex& a, const ClipVertex& b, const ClipVertex& c) {
    ScreenTriangle st;
    st.id = id;
    const ClipVertex* vs[3] = {&a, &b, &c};
    st.attr_w.resize(3 * static_cast<std::size_t>(attr_dim));
    double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
    double umin = vmin, umax = -vmin;
    for (int i = 0; i < 3; ++i) {
      const double iz = 1.0 / vs[i]->p.z();
      st.u[i] = k.fx * vs[i]->p.x() * iz + k.cx;
      st.v[i] = k.fy * vs[i]->p.y() * iz + k.cy;
      st.w[i] = iz;
      for (int d = 0; d < attr_dim; ++d) st.attr_w[i * attr_dim + d] = vs[i]->attr[d] * iz;
      umin = std::min(umin, st.u[i]);
      umax = std::max(umax, st.u[i]);
      vmin = std::min(vmin, st.v[i]);
      vmax = std::max(vmax, st.v[i]);
    }
    if (!(umax >= 0.0 && umin <= width - 1 && vmax >= 0.0 && vmin <= height - 1)) return;
    st.y_min = std::max(0, static_cast<int>(std::ceil(vmin)));
    st.y_max = std::min(height - 1, static_cast<int>(std::floor(vmax)));
    if (st.y_min > st.y_max) return;
    const int idx = static_cast<int>(screen.size());
    screen.push_back(std::move(st));
    for (int b = screen.back().y_min / kBandRows; b <= screen.back().y_max / kBandRows; ++b) {
      bins[static_cast<std::size_t>(b)].push_back(idx);
    }
  };

  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    const int id = static_cast<int>(t);
    int inside = 0;
    for (int i = 0; i < 3; ++i) inside += camera_points[tri[i]].z() >= near ? 1 : 0;
    if (inside == 0) continue;
    ClipVertex v[3] = {make_vertex(camera_points, attrs, attr_dim, tri[0]),
                       make_vertex(camera_points, attrs, attr_dim, tri[1]),
                       make_vertex(camera_points, attrs, attr_dim, tri[2])};
    if (inside == 3) {
      emit(id, v[0], v[1], v[2]);
      continue;
    }
    std::vector<ClipVertex> poly;
    for (int i = 0; i < 3; ++i) {
      const int j = (i + 1) % 3;
      const bool in_i = v[i].p.z() >= near, in_j = v[j].p.z() >= near;
      if (in_i) poly.push_back(v[i]);
      if (in_i != in_j) poly.push_back(intersect(v[i], tri[i], v[j], tri[j], near));
    }
    for (std::size_t i = 1; i + 1 < poly.size(); ++i) emit(id, poly[0], poly[i], poly[i + 1]);
  }

  parallel_blocks(n_bands, [&](int band) {
    const int y_lo = band * kBandRows, y_hi = std::min(height - 1, y_lo + kBandRows - 1);
    for (int idx : bins[static_cast<std::size_t>(band)]) {
      const ScreenTriangle& st = screen[static_cast<std::size_t>(idx)];
      int o[3] = {0, 1, 2};
      double area = edge_fn(st.u[0], st.v[0], st.u[1], st.v[1], st.u[2], st.v[2]);
      if (area == 0.0 || !std::isfinite(area)) continue;
      if (area < 0.0) {
        std::swap(o[1], o[2]);
        area = -area;
      }
      const double ux[3] = {st.u[o[0]], st.u[o[1]], st.u[o[2]]};
      const double vy[3] = {st.v[o[0]], st.v[o[1]], st.v[o[2]]};
      bool own[3];
      for (int e = 0; e < 3; ++e) {
        const int a = (e + 1) % 3, b = (e + 2) % 3;  // edge opposite vertex e
        own[e] = owns_edge(ux[a], vy[a], ux[b], vy[b]);
      }
      const double umin = std::min({ux[0], ux[1], ux[2]}), umax = std::max({ux[0], ux[1], ux[2]});
      const int x0 = std::max(0, static_cast<int>(std::ceil(umin)));
      const int x1 = std::min(width - 1, static_cast<int>(std::floor(umax)));
      const int ya = std::max(y_lo, st.y_min), yb = std::min(y_hi, st.y_max);
      const double inv_area = 1.0 / area;
      for (int y = ya; y <= yb; ++y) {
        for (int x = x0; x <= x1; ++x) {
          double lam[3];
          bool in = true;
          for (int e = 0; e < 3 && in; ++e) {
            const int a = (e + 1) % 3, b = (e + 2) % 3;
            const double ev = edge_fn(ux[a], vy[a], ux[b], vy[b], x, y);
            in = ev > 0.0 || (ev == 0.0 && own[e]);
            lam[e] = ev * inv_area;
          }
          if (!in) continue;
          const double iz = lam[0] * st.w[o[0]] + lam[1] * st.w[o[1]] + lam[2] * st.w[o[2]];
          if (!(iz > 0.0)) continue;
          const double z = 1.0 / iz;
          const std::size_t p = static_cast<std::size_t>(y) * width + x;
          if (!(z < out.depth[p])) continue;
          out.depth[p] = z;
          out.triangle[p] = st.id;
          for (int d = 0; d < attr_dim; ++d) {
            const double num = lam[0] * st.attr_w[o[0] * attr_dim + d] +
                               lam[1] * st.attr_w[o[1] * attr_dim + d] +
                               lam[2] * st.attr_w[o[2] * attr_dim + d];
            out.attrs[p * attr_dim + d] = static_cast<float>(num * z);
          }
        }
      }
    }
  });
  return out;
}

RenderResult rasterize(const TexturedMesh& mesh, const RelativePose& pose,
                       const CameraIntrinsics& k, int width, int height) {
  RenderResult res{Image(width, height, 4), Image(width, height, 1)};
  if (mesh.triangles.empty()) return res;
  double extent = 0.0;
  for (const auto& t : mesh.triangles) {
    for (int i : t) extent = std::max(extent, mesh.vertices[i].cwiseAbs().maxCoeff());
  }
  if (!(extent > 0.0)) return res;
  const double inv = 1.0 / extent;
  const Mat3 r = pose.rotation_matrix();
  const Vec3 t = pose.translation * inv;
  std::vector<Vec3> cam(mesh.vertices.size());
  std::vector<float> attrs(3 * mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    cam[i] = r * (mesh.vertices[i] * inv) + t;
    for (int c = 0; c < 3; ++c) attrs[3 * i + c] = mesh.colors[i][c];
  }
  const RasterOutput ro = rasterize_attributes(cam, attrs, 3, mesh.triangles, k, width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!ro.covered(x, y)) continue;
      const std::size_t p = static_cast<std::size_t>(y) * width + x;
      for (int c = 0; c < 3; ++c) res.rgba.at(x, y, c) = ro.attrs[3 * p + c];
      res.rgba.at(x, y, 3) = 1.0f;
      res.depth.at(x, y) = static_cast<float>(ro.depth[p] * extent);
    }
  }
  return res;
}

void write_obj(const TexturedMesh& mesh, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write mesh to " + path.string());
  std::vector<int> remap(mesh.vertices.size(), -1);
  int next = 1;
  for (const auto& t : mesh.triangles) {
    for (int i : t) {
      if (remap[i] >= 0) continue;
      remap[i] = next++;
      const auto& v = mesh.vertices[i];
      const auto& c = mesh.colors[i];
      os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << ' ' << c[0] << ' ' << c[1] << ' '
         << c[2] << '\n';
    }
  }
  for (const auto& t : mesh.triangles) {
    os << "f " << remap[t[0]] << ' ' << remap[t[1]] << ' ' << remap[t[2]] << '\n';
  }
  if (!os) throw Error("failed writing mesh to " + path.string());
}

}  // namespace geofill
