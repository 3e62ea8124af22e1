#include "geofill/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "geofill/error.hpp"
#include "json.hpp"

namespace geofill {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return tok;
    } else {
      tok.push_back(c);
    }
  }
  return tok;
}

std::uint8_t to_byte(float v) {
  const float clamped = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
}

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

Vec3 json_vec3(const json& j, const char* key, const fs::path& where) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3) {
    throw FormatError(where.string() + ": '" + key + "' must be an array of 3 numbers");
  }
  return {j[key][0].get<double>(), j[key][1].get<double>(), j[key][2].get<double>()};
}

RelativePose pose_from_json(const json& j, const fs::path& where) {
  if (!j.is_object() || !j.contains("quat") || !j["quat"].is_array() || j["quat"].size() != 4) {
    throw FormatError(where.string() + ": 'quat' must be an array of 4 numbers");
  }
  RelativePose pose;
  for (int i = 0; i < 4; ++i) pose.rotation[i] = j["quat"][i].get<double>();
  pose.translation = json_vec3(j, "t", where);
  const double n = pose.rotation.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw FormatError(where.string() + ": zero quaternion");
  pose.rotation /= n;
  return pose;
}

}  // namespace

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

Image read_depth_pfm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::string magic = read_token(in);
  if (magic != "Pf") {
    throw FormatError(path.string() + ": expected grayscale PFM header 'Pf', got '" + magic + "'");
  }
  const std::string ws = read_token(in), hs = read_token(in), ss = read_token(in);
  int w = 0, h = 0;
  double scale = 0.0;
  auto parse_int = [&](const std::string& s, int& v) {
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
  };
  if (!parse_int(ws, w) || !parse_int(hs, h) || w <= 0 || h <= 0) {
    throw FormatError(path.string() + ": malformed PFM dimensions");
  }
  {
    auto r = std::from_chars(ss.data(), ss.data() + ss.size(), scale);
    if (r.ec != std::errc() || r.ptr != ss.data() + ss.size() || scale == 0.0) {
      throw FormatError(path.string() + ": malformed PFM scale");
    }
  }
  if (scale > 0.0) {
    throw FormatError(path.string() + ": big-endian PFM not supported (scale must be negative)");
  }
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  std::vector<std::uint8_t> bytes(count * 4);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw FormatError(path.string() + ": truncated PFM payload");
  }
  Image out(w, h, 1);
  for (int row = 0; row < h; ++row) {
    const int y = h - 1 - row;
    for (int x = 0; x < w; ++x) {
      const std::uint8_t* b = bytes.data() + (static_cast<std::size_t>(row) * w + x) * 4;
      std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                           (static_cast<std::uint32_t>(b[2]) << 16) |
                           (static_cast<std::uint32_t>(b[3]) << 24);
      out.at(x, y) = std::bit_cast<float>(bits);
    }
  }
  out.check_finite(path.string().c_str());
  return out;
}

void write_depth_pfm(const Image& depth, const fs::path& path) {
  if (depth.channels() != 1) throw PreconditionError("write_depth_pfm: expected 1 channel");
  depth.check_finite("write_depth_pfm");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "Pf\n" << depth.width() << " " << depth.height() << "\n-1.0\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(depth.width()) * 4);
  for (int y = depth.height() - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width(); ++x) {
      const auto bits = std::bit_cast<std::uint32_t>(depth.at(x, y));
      for (int k = 0; k < 4; ++k) row[x * 4 + k] = static_cast<std::uint8_t>(bits >> (8 * k));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw Error("write failed for " + path.string());
}

Image read_png(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw FormatError(path.string() + ": " + image.message);
  }
  int channels = 3;
  if (image.format & PNG_FORMAT_FLAG_COLOR) {
    channels = (image.format & PNG_FORMAT_FLAG_ALPHA) ? 4 : 3;
  } else {
    channels = 1;
  }
  image.format = channels == 1 ? PNG_FORMAT_GRAY : channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw FormatError(path.string() + ": " + image.message);
  }
  Image out(static_cast<int>(image.width), static_cast<int>(image.height), channels);
  auto data = out.data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = buffer[i] / 255.0f;
  return out;
}

Image read_png_rgb(const fs::path& path) {
  Image img = read_png(path);
  if (img.channels() == 3) return img;
  Image out(img.width(), img.height(), 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = img.channels() == 1 ? img.at(x, y) : img.at(x, y, c);
      }
    }
  }
  return out;
}

void write_png(const Image& img, const fs::path& path) {
  if (img.channels() == 2) throw PreconditionError("write_png: 2-channel images unsupported");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 1   ? PNG_FORMAT_GRAY
                 : img.channels() == 3 ? PNG_FORMAT_RGB
                                       : PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> buffer(img.data().size());
  auto data = img.data();
  for (std::size_t i = 0; i < data.size(); ++i) buffer[i] = to_byte(data[i]);
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    throw Error("cannot write " + path.string() + ": " + image.message);
  }
}

HoleMask read_mask_png(const fs::path& path) {
  const Image img = read_png(path);
  Image values(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      values.at(x, y) = img.at(x, y, 0) >= 128.0f / 255.0f ? 1.0f : 0.0f;
    }
  }
  return HoleMask(std::move(values));
}

void write_mask_png(const HoleMask& mask, const fs::path& path) {
  Image img(mask.width(), mask.height(), 1);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) img.at(x, y) = mask.is_hole(x, y) ? 0.0f : 1.0f;
  }
  write_png(img, path);
}

CorrespondenceSet read_correspondences_csv(const fs::path& path,
                                           std::optional<ImageBounds> bounds) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "xs,ys,xt,yt") {
    throw FormatError(path.string() + ": expected header 'xs,ys,xt,yt', got '" + line + "'");
  }
  CorrespondenceSet set;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double v[4];
    std::size_t pos = 0;
    for (int k = 0; k < 4; ++k) {
      const std::size_t end = k < 3 ? line.find(',', pos) : line.size();
      if (end == std::string::npos) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 4 fields");
      }
      std::string field = line.substr(pos, end - pos);
      field.erase(0, field.find_first_not_of(" \t"));
      field.erase(field.find_last_not_of(" \t") + 1);
      auto r = std::from_chars(field.data(), field.data() + field.size(), v[k]);
      if (field.empty() || r.ec != std::errc() || r.ptr != field.data() + field.size() ||
          !std::isfinite(v[k])) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": non-numeric field '" +
                          field + "'");
      }
      pos = end + 1;
    }
    if (bounds) {
      const bool ok = v[0] >= 0 && v[0] <= bounds->source_width - 1 && v[1] >= 0 &&
                      v[1] <= bounds->source_height - 1 && v[2] >= 0 &&
                      v[2] <= bounds->target_width - 1 && v[3] >= 0 &&
                      v[3] <= bounds->target_height - 1;
      if (!ok) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) +
                          ": coordinate outside image bounds");
      }
    }
    set.push_back({v[0], v[1], v[2], v[3]});
  }
  return set;
}

void write_correspondences_csv(const CorrespondenceSet& corr, const fs::path& path) {
  std::ostringstream out;
  out << "xs,ys,xt,yt\n";
  for (const auto& c : corr.pairs) {
    out << format_double(c.xs) << ',' << format_double(c.ys) << ',' << format_double(c.xt) << ','
        << format_double(c.yt) << '\n';
  }
  write_text_file(path, out.str());
}

std::string pose_to_json_string(const RelativePose& pose) {
  json j;
  j["quat"] = {pose.rotation[0], pose.rotation[1], pose.rotation[2], pose.rotation[3]};
  j["t"] = {pose.translation[0], pose.translation[1], pose.translation[2]};
  return j.dump(2) + "\n";
}

RelativePose pose_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("pose: invalid JSON (") + e.what() + ")");
  }
  return pose_from_json(j, "pose");
}

RelativePose read_pose_json(const fs::path& path) { return pose_from_json(read_json_file(path), path); }

void write_pose_json(const RelativePose& pose, const fs::path& path) {
  write_text_file(path, pose_to_json_string(pose));
}

CameraIntrinsics read_intrinsics_json(const fs::path& path) {
  const json j = read_json_file(path);
  CameraIntrinsics k;
  try {
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return k;
}

void write_intrinsics_json(const CameraIntrinsics& k, const fs::path& path) {
  json j;
  j["fx"] = k.fx;
  j["fy"] = k.fy;
  j["cx"] = k.cx;
  j["cy"] = k.cy;
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace geofill
