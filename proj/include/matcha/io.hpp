#pragma once

// Volume files: raw little-endian float32 with a JSON sidecar, and MRC (mode 2 only).
// Raw files follow the in-memory order, z fastest; the sidecar "order" lists axes from
// fastest to slowest. MRC data are stored with columns along x as usual.

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "matcha/errors.hpp"
#include "matcha/volume.hpp"

namespace matcha {

static_assert(std::endian::native == std::endian::little, "volume I/O assumes a little-endian host");

enum class VolumeFormat { Auto, Raw, Mrc };

inline VolumeFormat parse_format(const std::string& s) {
  if (s == "auto") return VolumeFormat::Auto;
  if (s == "raw" || s == "raw-f32") return VolumeFormat::Raw;
  if (s == "mrc") return VolumeFormat::Mrc;
  throw ConfigError("unknown volume format '" + s + "'");
}

inline VolumeFormat resolve_format(const std::filesystem::path& p, VolumeFormat f) {
  if (f != VolumeFormat::Auto) return f;
  const std::string ext = p.extension().string();
  return (ext == ".mrc" || ext == ".map" || ext == ".MRC") ? VolumeFormat::Mrc : VolumeFormat::Raw;
}

inline std::vector<char> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + p.string());
  return buf;
}

/// Writes to a temporary sibling and renames it over `p`; no partial file survives an error.
inline void write_file_atomic(const std::filesystem::path& p, const void* data, std::size_t size) {
  namespace fs = std::filesystem;
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  if (!fs::is_directory(dir)) throw IoError("directory does not exist: " + dir.string());
  std::random_device rd;
  const fs::path tmp = dir / (p.filename().string() + ".tmp" + std::to_string(rd()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    out.write(static_cast<const char*>(data), std::streamsize(size));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed for " + p.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename onto " + p.string());
  }
}

inline void write_text_atomic(const std::filesystem::path& p, const std::string& s) {
  write_file_atomic(p, s.data(), s.size());
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& p) { return p.string() + ".json"; }

namespace detail {

template <class T>
T load(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <class T>
void store(char* p, T v) {
  std::memcpy(p, &v, sizeof(T));
}

inline int cube_root_exact(std::size_t n3) {
  const int n = int(std::lround(std::cbrt(double(n3))));
  return (std::size_t(n) * n * n == n3) ? n : -1;
}

}  // namespace detail

/// Raw float32. With n < 0 the side length comes from the sidecar, or from the file size.
inline Volume read_raw(const std::filesystem::path& p, int n = -1) {
  if (n < 0 && std::filesystem::exists(sidecar_path(p))) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(sidecar_path(p)));
      n = j.at("n").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw CorruptHeader("bad sidecar " + sidecar_path(p).string() + ": " + e.what());
    }
    if (j.contains("order") && j["order"] != "zyx") throw UnsupportedMode("sidecar order must be \"zyx\"");
  }
  const std::vector<char> buf = read_file(p);
  if (buf.size() % 4 != 0) throw CorruptHeader(p.string() + " is not a whole number of float32 values");
  if (n < 0) {
    n = detail::cube_root_exact(buf.size() / 4);
    if (n < 0) throw NonCubic(p.string() + " does not hold N^3 values");
  }
  if (buf.size() != std::size_t(n) * n * n * 4)
    throw CorruptHeader(p.string() + " size does not match N = " + std::to_string(n));
  Volume v(n);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = detail::load<float>(buf.data() + 4 * i);
  return v;
}

inline void write_raw(const std::filesystem::path& p, const Volume& v) {
  std::vector<float> f(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) f[i] = float(v[i]);
  write_file_atomic(p, f.data(), f.size() * sizeof(float));
  write_text_atomic(sidecar_path(p), nlohmann::json{{"n", v.n()}, {"order", "zyx"}}.dump() + "\n");
}

inline constexpr std::size_t kMrcHeader = 1024;

inline Volume read_mrc(const std::filesystem::path& p) {
  const std::vector<char> buf = read_file(p);
  if (buf.size() < kMrcHeader) throw CorruptHeader(p.string() + " is shorter than an MRC header");
  const char* h = buf.data();
  const auto stamp = static_cast<unsigned char>(h[212]);
  if (stamp == 0x11) throw UnsupportedMode("big-endian MRC files are not supported");
  const std::int32_t nc = detail::load<std::int32_t>(h), nr = detail::load<std::int32_t>(h + 4),
                     ns = detail::load<std::int32_t>(h + 8), mode = detail::load<std::int32_t>(h + 12);
  if (nc <= 0 || nr <= 0 || ns <= 0) throw CorruptHeader("MRC dimensions must be positive");
  if (mode != 2) throw UnsupportedMode("MRC mode " + std::to_string(mode) + " (only mode 2, float32, is read)");
  if (nc != nr || nr != ns)
    throw NonCubic("MRC map is " + std::to_string(nc) + "x" + std::to_string(nr) + "x" + std::to_string(ns));
  const std::int32_t map[3] = {detail::load<std::int32_t>(h + 64), detail::load<std::int32_t>(h + 68),
                               detail::load<std::int32_t>(h + 72)};
  int axis[3] = {0, 1, 2};  // axis[c] = spatial axis (0 = x) of the column/row/section direction
  if (map[0] != 0 || map[1] != 0 || map[2] != 0) {
    bool seen[3] = {false, false, false};
    for (int c = 0; c < 3; ++c) {
      if (map[c] < 1 || map[c] > 3 || seen[map[c] - 1]) throw CorruptHeader("MRC axis mapping is not a permutation");
      seen[map[c] - 1] = true;
      axis[c] = map[c] - 1;
    }
  }
  const std::int32_t next = detail::load<std::int32_t>(h + 92);
  if (next < 0) throw CorruptHeader("negative MRC extended header length");
  const int n = nc;
  const std::size_t need = kMrcHeader + std::size_t(next) + std::size_t(n) * n * n * 4;
  if (buf.size() < need) throw CorruptHeader(p.string() + " is truncated");
  const char* d = h + kMrcHeader + next;
  Volume v(n);
  int idx[3];
  std::size_t q = 0;
  for (int s = 0; s < n; ++s)
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c, ++q) {
        idx[axis[0]] = c;
        idx[axis[1]] = r;
        idx[axis[2]] = s;
        v(idx[0], idx[1], idx[2]) = detail::load<float>(d + 4 * q);
      }
  return v;
}

/// Mode 2, standard axis order, 1 unit per voxel.
inline void write_mrc(const std::filesystem::path& p, const Volume& v) {
  const int n = v.n();
  std::vector<char> buf(kMrcHeader + v.size() * 4, 0);
  char* h = buf.data();
  float lo = 0, hi = 0;
  double sum = 0, sum2 = 0;
  std::size_t q = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i, ++q) {
        const float f = float(v(i, j, k));
        detail::store(h + kMrcHeader + 4 * q, f);
        lo = q ? std::min(lo, f) : f;
        hi = q ? std::max(hi, f) : f;
        sum += f;
        sum2 += double(f) * f;
      }
  const double mean = sum / double(v.size());
  for (int a = 0; a < 3; ++a) {
    detail::store<std::int32_t>(h + 4 * a, n);       // nx, ny, nz
    detail::store<std::int32_t>(h + 28 + 4 * a, n);  // mx, my, mz
    detail::store<float>(h + 40 + 4 * a, float(n));  // cell lengths
    detail::store<float>(h + 52 + 4 * a, 90.0f);     // cell angles
    detail::store<std::int32_t>(h + 64 + 4 * a, a + 1);
  }
  detail::store<std::int32_t>(h + 12, 2);
  detail::store<float>(h + 76, lo);
  detail::store<float>(h + 80, hi);
  detail::store<float>(h + 84, float(mean));
  detail::store<std::int32_t>(h + 88, 1);
  std::memcpy(h + 208, "MAP ", 4);
  h[212] = 0x44;
  h[213] = 0x44;
  detail::store<float>(h + 216, float(std::sqrt(std::max(0.0, sum2 / double(v.size()) - mean * mean))));
  write_file_atomic(p, buf.data(), buf.size());
}

inline Volume read_volume(const std::filesystem::path& p, VolumeFormat f = VolumeFormat::Auto, int n = -1) {
  if (!std::filesystem::exists(p)) throw IoError("no such file: " + p.string());
  return resolve_format(p, f) == VolumeFormat::Mrc ? read_mrc(p) : read_raw(p, n);
}

inline void write_volume(const std::filesystem::path& p, const Volume& v, VolumeFormat f = VolumeFormat::Auto) {
  if (resolve_format(p, f) == VolumeFormat::Mrc)
    write_mrc(p, v);
  else
    write_raw(p, v);
}

}  // namespace matcha
