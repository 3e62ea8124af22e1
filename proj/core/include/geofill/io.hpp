#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "geofill/camera.hpp"
#include "geofill/image.hpp"

namespace geofill {

namespace fs = std::filesystem;

/// Grayscale little-endian PFM ("Pf", negative scale, bottom-up rows).
Image read_depth_pfm(const fs::path& path);
void write_depth_pfm(const Image& depth, const fs::path& path);

/// 8-bit PNG. Reading returns 1 (gray), 3 (RGB) or 4 (RGBA) channels.
Image read_png(const fs::path& path);
/// Reads any PNG and converts it to 3-channel RGB.
Image read_png_rgb(const fs::path& path);
void write_png(const Image& img, const fs::path& path);

/// Grayscale mask PNG: >= 128 is known (255 canonical), below is hole.
HoleMask read_mask_png(const fs::path& path);
void write_mask_png(const HoleMask& mask, const fs::path& path);

struct ImageBounds {
  int source_width = 0;
  int source_height = 0;
  int target_width = 0;
  int target_height = 0;
};

/// CSV with header "xs,ys,xt,yt". When bounds are given, every coordinate
/// must fall inside [0, w-1] x [0, h-1] of its image.
CorrespondenceSet read_correspondences_csv(const fs::path& path,
                                           std::optional<ImageBounds> bounds = std::nullopt);
void write_correspondences_csv(const CorrespondenceSet& corr, const fs::path& path);

/// {"quat": [w, x, y, z], "t": [x, y, z]}
RelativePose read_pose_json(const fs::path& path);
void write_pose_json(const RelativePose& pose, const fs::path& path);
std::string pose_to_json_string(const RelativePose& pose);
RelativePose pose_from_json_string(const std::string& text);

/// {"fx": …, "fy": …, "cx": …, "cy": …}
CameraIntrinsics read_intrinsics_json(const fs::path& path);
void write_intrinsics_json(const CameraIntrinsics& k, const fs::path& path);

std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, const std::string& text);

}  // namespace geofill
