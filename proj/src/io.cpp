// SPDX-License-Identifier: Apache-2.0
#include "covpool/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "covpool/error.hpp"

namespace covpool {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure on '" + path + "'");
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write failure on '" + path + "'");
}

bool file_exists(const std::string& path) {
  std::error_code ec;
  return std::filesystem::exists(path, ec);
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory '" + path + "': " + ec.message());
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_manifest(const std::string& dir, const std::vector<std::string>& names) {
  std::ostringstream os;
  for (const auto& name : names) {
    const std::string contents = read_file(dir + "/" + name);
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(contents)));
    os << "fnv1a64 " << hex << "  " << name << "\n";
  }
  write_file(dir + "/manifest.txt", os.str());
}

KvConfig KvConfig::parse(const std::string& text) {
  KvConfig cfg;
  std::size_t line_start = 0;
  std::size_t line_no = 0;
  while (line_start <= text.size()) {
    std::size_t eol = text.find('\n', line_start);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(line_start, eol - line_start);
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string stripped = trim(line);
    if (!stripped.empty()) {
      const std::size_t eq = stripped.find('=');
      if (eq == std::string::npos)
        throw ParseError("config line " + std::to_string(line_no) + " has no '='", line_start);
      const std::string key = trim(stripped.substr(0, eq));
      const std::string val = trim(stripped.substr(eq + 1));
      if (key.empty())
        throw ParseError("config line " + std::to_string(line_no) + " has an empty key",
                         line_start);
      cfg.set(key, val);
    }
    line_start = eol + 1;
    if (eol == text.size()) break;
  }
  return cfg;
}

KvConfig KvConfig::load(const std::string& path) { return parse(read_file(path)); }

bool KvConfig::has(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == key; });
}

std::string KvConfig::get(const std::string& key, const std::string& fallback) const {
  for (const auto& e : entries_)
    if (e.first == key) return e.second;
  return fallback;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  for (auto& e : entries_) {
    if (e.first == key) {
      e.second = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

std::string KvConfig::serialize() const {
  std::ostringstream os;
  for (const auto& e : entries_) os << e.first << " = " << e.second << "\n";
  return os.str();
}

namespace {

struct PlotFrame {
  double x_min, x_max, y_min, y_max;
  static constexpr double kLeft = 64, kRight = 700, kTop = 40, kBottom = 420;

  double px(double x) const {
    if (x_max == x_min) return (kLeft + kRight) / 2;
    return kLeft + (x - x_min) / (x_max - x_min) * (kRight - kLeft);
  }
  double py(double y) const {
    if (y_max == y_min) return (kTop + kBottom) / 2;
    return kBottom - (y - y_min) / (y_max - y_min) * (kBottom - kTop);
  }
};

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

std::string render_svg_plot(const std::string& title, const std::string& x_label,
                            const std::string& y_label, const std::vector<SvgSeries>& series,
                            const std::vector<SvgBand>& bands) {
  PlotFrame f{0, 1, 0, 1};
  bool any = false;
  auto grow = [&](double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) return;
    if (!any) {
      f.x_min = f.x_max = x;
      f.y_min = f.y_max = y;
      any = true;
      return;
    }
    f.x_min = std::min(f.x_min, x);
    f.x_max = std::max(f.x_max, x);
    f.y_min = std::min(f.y_min, y);
    f.y_max = std::max(f.y_max, y);
  };
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) grow(s.x[i], s.y[i]);
  for (const auto& b : bands)
    for (std::size_t i = 0; i < b.x.size(); ++i) {
      grow(b.x[i], b.y_lo[i]);
      grow(b.x[i], b.y_hi[i]);
    }

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\"480\" "
        "viewBox=\"0 0 760 480\">\n";
  os << "<rect width=\"760\" height=\"480\" fill=\"white\"/>\n";
  os << "<text x=\"380\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
     << "</text>\n";

  for (const auto& b : bands) {
    if (b.x.empty()) continue;
    os << "<polygon fill=\"" << b.color << "\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < b.x.size(); ++i)
      os << f.px(b.x[i]) << "," << f.py(b.y_hi[i]) << " ";
    for (std::size_t i = b.x.size(); i-- > 0;)
      os << f.px(b.x[i]) << "," << f.py(b.y_lo[i]) << " ";
    os << "\"/>\n";
  }

  // axes
  os << "<line x1=\"" << PlotFrame::kLeft << "\" y1=\"" << PlotFrame::kBottom << "\" x2=\""
     << PlotFrame::kRight << "\" y2=\"" << PlotFrame::kBottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << PlotFrame::kLeft << "\" y1=\"" << PlotFrame::kTop << "\" x2=\""
     << PlotFrame::kLeft << "\" y2=\"" << PlotFrame::kBottom << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = f.x_min + (f.x_max - f.x_min) * t / 4.0;
    const double fy = f.y_min + (f.y_max - f.y_min) * t / 4.0;
    os << "<text x=\"" << f.px(fx) << "\" y=\"" << PlotFrame::kBottom + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt_tick(fx) << "</text>\n";
    os << "<text x=\"" << PlotFrame::kLeft - 6 << "\" y=\"" << f.py(fy) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << fmt_tick(fy) << "</text>\n";
  }
  os << "<text x=\"380\" y=\"462\" text-anchor=\"middle\" font-size=\"13\">" << x_label
     << "</text>\n";
  os << "<text x=\"16\" y=\"230\" text-anchor=\"middle\" font-size=\"13\" "
        "transform=\"rotate(-90 16 230)\">"
     << y_label << "</text>\n";

  double legend_y = PlotFrame::kTop + 6;
  for (const auto& s : series) {
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << f.px(s.x[i]) << "," << f.py(s.y[i]) << " ";
    os << "\"/>\n";
    os << "<line x1=\"590\" y1=\"" << legend_y << "\" x2=\"614\" y2=\"" << legend_y
       << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"620\" y=\"" << legend_y + 4 << "\" font-size=\"12\">" << s.label
       << "</text>\n";
    legend_y += 18;
  }
  os << "</svg>\n";
  return os.str();
}

namespace {
void append_bytes_le(std::string& out, const void* p, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(p);
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ == __ORDER_BIG_ENDIAN__
  for (std::size_t i = n; i-- > 0;) out.push_back(static_cast<char>(b[i]));
#else
  out.append(reinterpret_cast<const char*>(b), n);
#endif
}

void read_bytes_le(const std::string& in, std::size_t& off, void* p, std::size_t n) {
  if (off + n > in.size())
    throw ParseError("unexpected end of file (need " + std::to_string(n) + " bytes)", off);
  auto* b = static_cast<unsigned char*>(p);
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ == __ORDER_BIG_ENDIAN__
  for (std::size_t i = n; i-- > 0;) b[i] = static_cast<unsigned char>(in[off + n - 1 - i]);
#else
  std::memcpy(b, in.data() + off, n);
#endif
  off += n;
}
}  // namespace

void store_u32_le(std::string& out, std::uint32_t v) { append_bytes_le(out, &v, 4); }
void store_u64_le(std::string& out, std::uint64_t v) { append_bytes_le(out, &v, 8); }
void store_f64_le(std::string& out, double v) { append_bytes_le(out, &v, 8); }

std::uint32_t load_u32_le(const std::string& in, std::size_t& off) {
  std::uint32_t v;
  read_bytes_le(in, off, &v, 4);
  return v;
}

std::uint64_t load_u64_le(const std::string& in, std::size_t& off) {
  std::uint64_t v;
  read_bytes_le(in, off, &v, 8);
  return v;
}

double load_f64_le(const std::string& in, std::size_t& off) {
  double v;
  read_bytes_le(in, off, &v, 8);
  return v;
}

}  // namespace covpool
