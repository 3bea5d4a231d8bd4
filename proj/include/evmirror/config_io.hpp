#pragma once

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "evmirror/errors.hpp"
#include "evmirror/params.hpp"

namespace evmirror {

// Plain key = value text, '#' starts a comment. Each physical quantity accepts
// one canonical SI key plus unit-suffixed spellings (exact power-of-ten factors,
// *_hz keys are multiplied by 2 pi, decay_length_nm is stored as its reciprocal).
// save_config emits canonical SI keys with 17 significant digits, so a
// save/load cycle reproduces every double bit for bit.

namespace cfgio {

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

enum class ValueKind { kDouble, kDoubleList, kInt, kUint64 };

struct ParsedValue {
  std::vector<double> nums;
  long long integer = 0;
  unsigned long long uinteger = 0;
};

struct KeyVariant {
  const char* key;
  double factor;    // applied after parsing: si = raw * factor
  bool reciprocal;  // si = 1 / (raw * factor)
};

struct QuantitySpec {
  const char* canonical;  // key used by save_config, factor exactly 1
  ValueKind kind;
  std::vector<KeyVariant> keys;
  void (*store)(SimulationConfig&, const ParsedValue&);
  std::string (*emit)(const SimulationConfig&);
};

inline const std::vector<QuantitySpec>& quantity_table() {
  static const double k2pi = 2.0 * kPi;
  static const std::vector<QuantitySpec> table = {
      {"lambda_L_m", ValueKind::kDouble,
       {{"lambda_L_m", 1.0, false}, {"lambda_L_nm", 1e-9, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.mirror.lambda_L = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.mirror.lambda_L); }},
      {"kappa_per_m", ValueKind::kDouble,
       {{"kappa_per_m", 1.0, false}, {"decay_length_nm", 1e-9, true}},
       [](SimulationConfig& c, const ParsedValue& v) { c.mirror.kappa = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.mirror.kappa); }},
      {"eta", ValueKind::kDouble,
       {{"eta", 1.0, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.mirror.eta = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.mirror.eta); }},

      {"n_atoms", ValueKind::kInt,
       {{"n_atoms", 1.0, false}},
       [](SimulationConfig& c, const ParsedValue& v) {
         c.ensemble.n_atoms = static_cast<std::size_t>(v.integer);
       },
       [](const SimulationConfig& c) { return std::to_string(c.ensemble.n_atoms); }},
      {"condensed_fraction", ValueKind::kDouble,
       {{"condensed_fraction", 1.0, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.ensemble.condensed_fraction = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.ensemble.condensed_fraction); }},
      {"temperature_K", ValueKind::kDouble,
       {{"temperature_K", 1.0, false}, {"temperature_nK", 1e-9, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.ensemble.temperature = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.ensemble.temperature); }},
      {"omega_x_rad_s", ValueKind::kDouble,
       {{"omega_x_rad_s", 1.0, false}, {"trap_freq_x_hz", k2pi, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.ensemble.omega_x = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.ensemble.omega_x); }},
      {"omega_perp_rad_s", ValueKind::kDouble,
       {{"omega_perp_rad_s", 1.0, false}, {"trap_freq_perp_hz", k2pi, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.ensemble.omega_perp = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.ensemble.omega_perp); }},
      {"R_x_m", ValueKind::kDouble,
       {{"R_x_m", 1.0, false}, {"R_x_um", 1e-6, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.ensemble.R_x = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.ensemble.R_x); }},
      {"V_x_m_s", ValueKind::kDouble,
       {{"V_x_m_s", 1.0, false}, {"V_x_mm_s", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.ensemble.V_x = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.ensemble.V_x); }},
      {"V_perp_m_s", ValueKind::kDouble,
       {{"V_perp_m_s", 1.0, false}, {"V_perp_mm_s", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.ensemble.V_perp = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.ensemble.V_perp); }},
      {"v0_x_m_s", ValueKind::kDouble,
       {{"v0_x_m_s", 1.0, false}, {"v0_x_mm_s", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.ensemble.v0.x = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.ensemble.v0.x); }},
      {"v0_y_m_s", ValueKind::kDouble,
       {{"v0_y_m_s", 1.0, false}, {"v0_y_mm_s", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.ensemble.v0.y = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.ensemble.v0.y); }},
      {"v0_z_m_s", ValueKind::kDouble,
       {{"v0_z_m_s", 1.0, false}, {"v0_z_mm_s", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.ensemble.v0.z = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.ensemble.v0.z); }},
      {"h0_m", ValueKind::kDouble,
       {{"h0_m", 1.0, false}, {"h0_mm", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.ensemble.h0 = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.ensemble.h0); }},

      {"sigma_vx_m_s", ValueKind::kDouble,
       {{"sigma_vx_m_s", 1.0, false}, {"sigma_vx_mm_s", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.kick.sigma_vx = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.kick.sigma_vx); }},
      {"sigma_vy_m_s", ValueKind::kDouble,
       {{"sigma_vy_m_s", 1.0, false}, {"sigma_vy_mm_s", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.kick.sigma_vy = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.kick.sigma_vy); }},
      {"alpha", ValueKind::kDouble,
       {{"alpha", 1.0, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.kick.alpha = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.kick.alpha); }},
      {"sigma_s_m", ValueKind::kDouble,
       {{"sigma_s_m", 1.0, false}, {"sigma_s_nm", 1e-9, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.kick.sigma_s = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.kick.sigma_s); }},

      {"pixels_x", ValueKind::kInt,
       {{"pixels_x", 1.0, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.imaging.pixels_x = static_cast<int>(v.integer); },
       [](const SimulationConfig& c) { return std::to_string(c.imaging.pixels_x); }},
      {"pixels_z", ValueKind::kInt,
       {{"pixels_z", 1.0, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.imaging.pixels_z = static_cast<int>(v.integer); },
       [](const SimulationConfig& c) { return std::to_string(c.imaging.pixels_z); }},
      {"field_x_m", ValueKind::kDouble,
       {{"field_x_m", 1.0, false}, {"field_x_mm", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.imaging.field_x = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.imaging.field_x); }},
      {"field_z_m", ValueKind::kDouble,
       {{"field_z_m", 1.0, false}, {"field_z_mm", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.imaging.field_z = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.imaging.field_z); }},
      {"origin_x_m", ValueKind::kDouble,
       {{"origin_x_m", 1.0, false}, {"origin_x_mm", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.imaging.origin_x = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.imaging.origin_x); }},
      {"origin_z_m", ValueKind::kDouble,
       {{"origin_z_m", 1.0, false}, {"origin_z_mm", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.imaging.origin_z = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.imaging.origin_z); }},
      {"blur_rms_px", ValueKind::kDouble,
       {{"blur_rms_px", 1.0, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.imaging.blur_rms = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.imaging.blur_rms); }},
      {"region_x_m", ValueKind::kDouble,
       {{"region_x_m", 1.0, false}, {"region_x_mm", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.imaging.region_x = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.imaging.region_x); }},
      {"region_z_m", ValueKind::kDouble,
       {{"region_z_m", 1.0, false}, {"region_z_mm", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.imaging.region_z = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.imaging.region_z); }},

      {"seed", ValueKind::kUint64,
       {{"seed", 1.0, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.seed = v.uinteger; },
       [](const SimulationConfig& c) { return std::to_string(c.seed); }},
      {"tof_s", ValueKind::kDoubleList,
       {{"tof_s", 1.0, false}, {"tof_ms", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.time_of_flight = v.nums; },
       [](const SimulationConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.time_of_flight.size(); ++i) {
           if (i) s += ", ";
           s += format_g17(c.time_of_flight[i]);
         }
         return s;
       }},
      {"mirror_window_s", ValueKind::kDouble,
       {{"mirror_window_s", 1.0, false}, {"mirror_window_ms", 1e-3, false}},
       [](SimulationConfig& c, const ParsedValue& v) { c.mirror_window = v.nums[0]; },
       [](const SimulationConfig& c) { return format_g17(c.mirror_window); }},
  };
  return table;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool parse_double_token(const std::string& tok, double& out) {
  if (tok.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(tok.c_str(), &end);
  return end == tok.c_str() + tok.size() && errno == 0;
}

}  // namespace cfgio

/// Parses a configuration stream; `origin` names the source in error messages.
/// Throws ConfigError with line numbers on unknown keys, duplicates, malformed
/// numbers, and a combined report naming every missing required key.
inline SimulationConfig parse_config(std::istream& in, const std::string& origin) {
  using namespace cfgio;
  const auto& table = quantity_table();

  // key text -> (quantity index, variant index)
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> lookup;
  for (std::size_t qi = 0; qi < table.size(); ++qi)
    for (std::size_t vi = 0; vi < table[qi].keys.size(); ++vi)
      lookup.emplace(table[qi].keys[vi].key, std::make_pair(qi, vi));

  SimulationConfig cfg;
  std::vector<int> seen_line(table.size(), 0);
  std::string problems;
  auto note = [&](int line, const std::string& msg) {
    problems += origin + ":" + std::to_string(line) + ": " + msg + "\n";
  };

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      note(line_no, "expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto hit = lookup.find(key);
    if (hit == lookup.end()) {
      note(line_no, "unknown key '" + key + "'");
      continue;
    }
    const auto [qi, vi] = hit->second;
    const QuantitySpec& q = table[qi];
    const KeyVariant& variant = q.keys[vi];
    if (seen_line[qi]) {
      note(line_no, "duplicate setting of '" + std::string(q.canonical) +
                        "' (already set on line " + std::to_string(seen_line[qi]) + ")");
      continue;
    }
    if (value.empty()) {
      note(line_no, "key '" + key + "' has an empty value");
      continue;
    }

    ParsedValue pv;
    bool ok = true;
    switch (q.kind) {
      case ValueKind::kDouble: {
        double d;
        ok = parse_double_token(value, d);
        if (ok) pv.nums.push_back(variant.reciprocal ? 1.0 / (d * variant.factor)
                                                     : d * variant.factor);
        break;
      }
      case ValueKind::kDoubleList: {
        std::size_t begin = 0;
        while (ok && begin <= value.size()) {
          auto comma = value.find(',', begin);
          const std::string tok =
              trim(value.substr(begin, comma == std::string::npos ? comma : comma - begin));
          double d;
          ok = parse_double_token(tok, d);
          if (ok) pv.nums.push_back(d * variant.factor);
          if (comma == std::string::npos) break;
          begin = comma + 1;
        }
        break;
      }
      case ValueKind::kInt: {
        errno = 0;
        char* end = nullptr;
        pv.integer = std::strtoll(value.c_str(), &end, 10);
        ok = end == value.c_str() + value.size() && errno == 0 && pv.integer >= 0;
        break;
      }
      case ValueKind::kUint64: {
        errno = 0;
        char* end = nullptr;
        pv.uinteger = std::strtoull(value.c_str(), &end, 10);
        ok = end == value.c_str() + value.size() && errno == 0 &&
             value.find('-') == std::string::npos;
        break;
      }
    }
    if (!ok) {
      note(line_no, "key '" + key + "': cannot parse value '" + value + "'");
      continue;
    }
    q.store(cfg, pv);
    seen_line[qi] = line_no;
  }

  std::string missing;
  for (std::size_t qi = 0; qi < table.size(); ++qi)
    if (!seen_line[qi]) {
      if (!missing.empty()) missing += ", ";
      missing += table[qi].canonical;
    }
  if (!missing.empty()) problems += origin + ": missing required keys: " + missing + "\n";
  if (!problems.empty()) {
    problems.pop_back();  // trailing newline
    throw ConfigError(problems);
  }

  cfg.mirror = EvanescentWaveParams::from_optics(cfg.mirror.lambda_L, cfg.mirror.kappa,
                                                 cfg.mirror.eta, cfg.constants);
  return cfg;
}

inline SimulationConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in, path);
}

/// Writes canonical SI keys with 17 significant digits; load_config on the
/// result restores every field bit for bit.
inline void save_config(const SimulationConfig& cfg, std::ostream& out) {
  out << "# simulation configuration, SI units\n";
  for (const auto& q : cfgio::quantity_table()) out << q.canonical << " = " << q.emit(cfg) << "\n";
}

inline void save_config(const SimulationConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file: " + path);
  save_config(cfg, out);
  out.flush();
  if (!out) throw IoError("failed while writing config file: " + path);
}

}  // namespace evmirror
