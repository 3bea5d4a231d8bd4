#pragma once

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "evmirror/config_io.hpp"
#include "evmirror/errors.hpp"
#include "evmirror/imaging.hpp"

namespace evmirror {

// Images travel as 16-bit binary PGM (P5, maxval 65535, big-endian samples)
// plus a sidecar text file <stem>.txt holding the physical geometry and the
// gray-level scale. Pixel rows are written top-down: the first row is the
// highest z, so viewers show up as up.

namespace detail {

inline std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path) {
  std::filesystem::path p = pgm_path;
  return p.replace_extension(".txt");
}

}  // namespace detail

inline void write_image_pgm(const AbsorptionImage& img, const std::string& pgm_path) {
  double peak = 0.0;
  for (double v : img.data) peak = std::max(peak, v);
  const double scale = peak > 0.0 ? peak : 1.0;  // physical value of gray 65535

  std::ofstream out(pgm_path, std::ios::binary);
  if (!out) throw IoError("cannot write image file: " + pgm_path);
  out << "P5\n" << img.pixels_x << " " << img.pixels_z << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.pixels_x) * 2);
  for (int r = 0; r < img.pixels_z; ++r) {
    const int iz = img.pixels_z - 1 - r;
    for (int ix = 0; ix < img.pixels_x; ++ix) {
      const double v = img.at(ix, iz) / scale;
      const auto gray = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      row[2 * ix] = static_cast<unsigned char>(gray >> 8);
      row[2 * ix + 1] = static_cast<unsigned char>(gray & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  out.flush();
  if (!out) throw IoError("failed while writing image file: " + pgm_path);

  const std::string side = detail::sidecar_path(pgm_path).string();
  std::ofstream meta(side);
  if (!meta) throw IoError("cannot write image sidecar: " + side);
  meta << "pixels_x = " << img.pixels_x << "\n"
       << "pixels_z = " << img.pixels_z << "\n"
       << "pitch_x_m = " << cfgio::format_g17(img.pitch_x) << "\n"
       << "pitch_z_m = " << cfgio::format_g17(img.pitch_z) << "\n"
       << "origin_x_m = " << cfgio::format_g17(img.origin_x) << "\n"
       << "origin_z_m = " << cfgio::format_g17(img.origin_z) << "\n"
       << "time_s = " << cfgio::format_g17(img.time) << "\n"
       << "value_scale = " << cfgio::format_g17(scale) << "\n"
       << "dropped_atoms = " << img.dropped << "\n";
  meta.flush();
  if (!meta) throw IoError("failed while writing image sidecar: " + side);
}

namespace detail {

// Reads one whitespace-delimited header token, skipping '#' comment lines,
// tracking the byte offset for error messages.
inline std::string pgm_token(std::istream& in, long& offset, const std::string& path) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    ++offset;
    if (ch == '#') {
      while ((ch = in.get()) != EOF) {
        ++offset;
        if (ch == '\n') break;
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok += static_cast<char>(ch);
  }
  if (tok.empty())
    throw IoError(path + ": truncated header at byte " + std::to_string(offset));
  return tok;
}

inline long parse_pgm_int(const std::string& tok, long min, long max, const char* what,
                          long offset, const std::string& path) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(tok.c_str(), &end, 10);
  if (end != tok.c_str() + tok.size() || errno != 0 || v < min || v > max)
    throw IoError(path + ": invalid " + what + " '" + tok + "' before byte " +
                  std::to_string(offset));
  return v;
}

}  // namespace detail

/// Reads an image written by write_image_pgm, restoring physical geometry
/// from the sidecar. Malformed files are reported with the byte offset.
inline AbsorptionImage read_image_pgm(const std::string& pgm_path) {
  std::ifstream in(pgm_path, std::ios::binary);
  if (!in) throw IoError("cannot open image file: " + pgm_path);

  long offset = 0;
  const std::string magic = detail::pgm_token(in, offset, pgm_path);
  if (magic != "P5")
    throw IoError(pgm_path + ": bad magic '" + magic + "' at byte 0 (expected P5)");
  const long w = detail::parse_pgm_int(detail::pgm_token(in, offset, pgm_path), 1, 1 << 20,
                                       "width", offset, pgm_path);
  const long h = detail::parse_pgm_int(detail::pgm_token(in, offset, pgm_path), 1, 1 << 20,
                                       "height", offset, pgm_path);
  const long maxval = detail::parse_pgm_int(detail::pgm_token(in, offset, pgm_path), 1, 65535,
                                            "maxval", offset, pgm_path);
  if (maxval != 65535)
    throw IoError(pgm_path + ": unsupported maxval " + std::to_string(maxval) + " before byte " +
                  std::to_string(offset) + " (expected 65535)");

  AbsorptionImage img;
  img.pixels_x = static_cast<int>(w);
  img.pixels_z = static_cast<int>(h);
  img.data.assign(static_cast<std::size_t>(w) * h, 0.0);
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 2);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw IoError(pgm_path + ": truncated pixel data at byte " +
                  std::to_string(offset + in.gcount()) + " (expected " +
                  std::to_string(offset + static_cast<long>(raw.size())) + " bytes)");

  const std::string side = detail::sidecar_path(pgm_path).string();
  std::ifstream meta(side);
  if (!meta) throw IoError("cannot open image sidecar: " + side);
  double pitch_x = 0, pitch_z = 0, origin_x = 0, origin_z = 0, time = 0, scale = 0, dropped = 0;
  bool seen[7] = {};
  std::string line;
  int line_no = 0;
  while (std::getline(meta, line)) {
    ++line_no;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = cfgio::trim(line.substr(0, eq));
    const std::string val = cfgio::trim(line.substr(eq + 1));
    double* dst = nullptr;
    int slot = -1;
    if (key == "pitch_x_m") dst = &pitch_x, slot = 0;
    else if (key == "pitch_z_m") dst = &pitch_z, slot = 1;
    else if (key == "origin_x_m") dst = &origin_x, slot = 2;
    else if (key == "origin_z_m") dst = &origin_z, slot = 3;
    else if (key == "time_s") dst = &time, slot = 4;
    else if (key == "value_scale") dst = &scale, slot = 5;
    else if (key == "dropped_atoms") dst = &dropped, slot = 6;
    if (!dst) continue;  // pixels_x/pixels_z are redundant with the PGM header
    if (!cfgio::parse_double_token(val, *dst))
      throw IoError(side + ":" + std::to_string(line_no) + ": cannot parse '" + key + "'");
    seen[slot] = true;
  }
  static const char* kNames[7] = {"pitch_x_m", "pitch_z_m", "origin_x_m", "origin_z_m",
                                  "time_s",    "value_scale", "dropped_atoms"};
  for (int k = 0; k < 7; ++k)
    if (!seen[k]) throw IoError(side + ": missing key " + kNames[k]);

  img.pitch_x = pitch_x;
  img.pitch_z = pitch_z;
  img.origin_x = origin_x;
  img.origin_z = origin_z;
  img.time = time;
  img.dropped = static_cast<std::size_t>(dropped);
  for (int r = 0; r < img.pixels_z; ++r) {
    const int iz = img.pixels_z - 1 - r;
    for (int ix = 0; ix < img.pixels_x; ++ix) {
      const std::size_t o = (static_cast<std::size_t>(r) * img.pixels_x + ix) * 2;
      const auto gray = static_cast<std::uint16_t>((raw[o] << 8) | raw[o + 1]);
      img.at(ix, iz) = gray / 65535.0 * scale;
    }
  }
  return img;
}

}  // namespace evmirror
