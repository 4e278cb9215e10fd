// SPDX-License-Identifier: Apache-2.0
//
// Output plumbing shared by the CLI and the training engine: shortest
// round-trip float formatting, CSV files, a minimal SVG line plotter, the
// key=value config format, output manifests, and endian helpers.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace covpool {

/// Shortest decimal string that round-trips the exact double (to_chars).
std::string format_double(double v);

std::string read_file(const std::string& path);          // throws IoError
void write_file(const std::string& path, const std::string& contents);
bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);                // mkdir -p

/// FNV-1a 64-bit over a byte string; used for the run-directory manifest.
std::uint64_t fnv1a64(const std::string& bytes);

/// Write `manifest.txt`: one "fnv1a64 <hex>  <name>" line per output file.
void write_manifest(const std::string& dir, const std::vector<std::string>& names);

// -- key=value config ---------------------------------------------------------

/// One key = value per line, '#' starts a comment. Order-preserving.
class KvConfig {
public:
  static KvConfig parse(const std::string& text);   // throws ParseError
  static KvConfig load(const std::string& path);

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  void set(const std::string& key, const std::string& value);
  std::string serialize() const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// -- SVG line plots -----------------------------------------------------------

struct SvgSeries {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
};

/// Optional shaded band between two y-series sharing the x grid.
struct SvgBand {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y_lo;
  std::vector<double> y_hi;
};

/// Render polyline series (one <polyline> each) with axes, tick labels and a
/// legend. Pure function of its inputs.
std::string render_svg_plot(const std::string& title, const std::string& x_label,
                            const std::string& y_label, const std::vector<SvgSeries>& series,
                            const std::vector<SvgBand>& bands = {});

// -- endian helpers (files are little-endian on every platform) ----------------

void store_u32_le(std::string& out, std::uint32_t v);
void store_u64_le(std::string& out, std::uint64_t v);
void store_f64_le(std::string& out, double v);
std::uint32_t load_u32_le(const std::string& in, std::size_t& off);  // throws ParseError
std::uint64_t load_u64_le(const std::string& in, std::size_t& off);
double load_f64_le(const std::string& in, std::size_t& off);

}  // namespace covpool
