#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "geofill/camera.hpp"
#include "geofill/image.hpp"

namespace geofill {

enum class GridDiagonal { kTopLeftToBottomRight, kTopRightToBottomLeft };

/// One vertex per source pixel, backprojected with the effective depth.
/// Vertices with non-positive depth are kept in the arrays but flagged and
/// never referenced by a triangle.
struct TexturedMesh {
  int grid_width = 0;
  int grid_height = 0;
  std::vector<Vec3> vertices;
  std::vector<std::array<float, 3>> colors;
  std::vector<double> depth;
  std::vector<std::uint8_t> vertex_valid;
  std::vector<std::array<int, 3>> triangles;

  int vertex_index(int x, int y) const noexcept { return y * grid_width + x; }
};

TexturedMesh build_mesh(const Image& src, const DepthState& depth, const CameraIntrinsics& k,
                        GridDiagonal diagonal = GridDiagonal::kTopLeftToBottomRight);

/// 2|di - dj| / (di + dj).
double edge_drop_ratio(double di, double dj) noexcept;

/// Removes every triangle with an edge whose ratio exceeds eps_edge; an edge
/// exactly at the threshold survives.
TexturedMesh drop_edges(const TexturedMesh& mesh, double eps_edge);

/// Per-pixel output of the attribute rasterizer. `triangle` is -1 where no
/// triangle covers the pixel center; depth is +inf there.
struct RasterOutput {
  int width = 0;
  int height = 0;
  int attr_dim = 0;
  std::vector<float> attrs;
  std::vector<double> depth;
  std::vector<int> triangle;

  bool covered(int x, int y) const noexcept {
    return triangle[static_cast<std::size_t>(y) * width + x] >= 0;
  }
};

/// Z-buffered rasterization of camera-frame triangles. Samples at pixel
/// centers with a top-left fill rule, perspective-correct attribute
/// interpolation, and clipping against the plane z = near. Ties in depth keep
/// the earlier triangle.
RasterOutput rasterize_attributes(const std::vector<Vec3>& camera_points,
                                  const std::vector<float>& attrs, int attr_dim,
                                  const std::vector<std::array<int, 3>>& triangles,
                                  const CameraIntrinsics& k, int width, int height,
                                  double near = 1e-3);

struct RenderResult {
  Image rgba;   // straight (non-premultiplied) color, alpha in {0, 1}
  Image depth;  // target-frame z in the mesh's original units, 0 where empty
};

/// Renders the mesh from the target camera. Vertices and translation are
/// scaled together by 1 / max |vertex coordinate| before projection.
RenderResult rasterize(const TexturedMesh& mesh, const RelativePose& pose,
                       const CameraIntrinsics& k, int width, int height);

/// OBJ with "v x y z r g b" vertex colors; only triangle-referenced
/// vertices are written.
void write_obj(const TexturedMesh& mesh, const std::filesystem::path& path);

}  // namespace geofill
