// SPDX-License-Identifier: Apache-2.0
#include "covpool/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "covpool/error.hpp"
#include "covpool/io.hpp"
#include "covpool/rng.hpp"

namespace covpool {

namespace {

// All perfect pairings of {0..d-1} (d even; an odd leftover channel stays
// unpaired), enumerated in a canonical order.
void enumerate_pairings(std::vector<std::size_t> remaining,
                        std::vector<std::pair<std::size_t, std::size_t>> current,
                        std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& out) {
  if (remaining.size() < 2) {
    out.push_back(current);
    return;
  }
  const std::size_t first = remaining.front();
  for (std::size_t j = 1; j < remaining.size(); ++j) {
    std::vector<std::size_t> rest;
    for (std::size_t k = 1; k < remaining.size(); ++k)
      if (k != j) rest.push_back(remaining[k]);
    auto cur = current;
    cur.emplace_back(first, remaining[j]);
    enumerate_pairings(std::move(rest), std::move(cur), out);
  }
}

std::vector<std::vector<std::pair<std::size_t, std::size_t>>> pairings_for(std::size_t d) {
  std::vector<std::size_t> idx(d);
  for (std::size_t i = 0; i < d; ++i) idx[i] = i;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> out;
  enumerate_pairings(std::move(idx), {}, out);
  return out;
}

struct ClassGenerator {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double signed_rho;
};

ClassGenerator generator_for(const SyntheticCovTaskSpec& spec, std::size_t cls) {
  if (spec.channels < 2) throw DomainError("gen_cov_task: needs d >= 2");
  if (spec.classes < 2) throw DomainError("gen_cov_task: needs at least 2 classes");
  if (!(spec.rho > 0.0) || !(spec.rho < 1.0))
    throw DomainError("gen_cov_task: rho must lie in (0,1); the requested spectrum is degenerate");
  const auto pats = pairings_for(spec.channels);
  if (spec.classes > 2 * pats.size())
    throw DomainError("gen_cov_task: only " + std::to_string(2 * pats.size()) +
                      " distinct covariance patterns exist for d = " +
                      std::to_string(spec.channels));
  if (cls >= spec.classes) throw DomainError("gen_cov_task: class index out of range");
  ClassGenerator g;
  g.pairs = pats[cls % pats.size()];
  g.signed_rho = cls < pats.size() ? spec.rho : -spec.rho;
  return g;
}

constexpr double kPixelMean = 0.5;
constexpr double kPixelStd = 0.125;  // feature = (pixel − 0.5)·8

}  // namespace

Mat class_covariance(const SyntheticCovTaskSpec& spec, std::size_t cls) {
  const ClassGenerator g = generator_for(spec, cls);
  Mat c = Mat::identity(spec.channels);
  for (const auto& [a, b] : g.pairs) {
    c(a, b) = g.signed_rho;
    c(b, a) = g.signed_rho;
  }
  return c;
}

std::pair<Dataset, Dataset> gen_cov_task(const SyntheticCovTaskSpec& spec) {
  const std::size_t d = spec.channels;
  const std::size_t n = spec.height * spec.width;
  if (n < 2) throw DomainError("gen_cov_task: spatial size must be >= 2");

  auto make_split = [&](std::size_t per_class, std::uint64_t stream_tag, const char* name) {
    Dataset ds;
    ds.classes = spec.classes;
    ds.split = name;
    ds.norm_mean = kPixelMean;
    ds.norm_std = kPixelStd;
    const std::size_t total = per_class * spec.classes;
    ds.images = Tensor(total, d, spec.height, spec.width);
    ds.labels.resize(total);
    ds.per_class_count.assign(spec.classes, per_class);

    Rng rng(Rng::mix(spec.seed, stream_tag));
    std::size_t si = 0;
    for (std::size_t cls = 0; cls < spec.classes; ++cls) {
      const ClassGenerator g = generator_for(spec, cls);
      const double s_hi = std::sqrt(1.0 + std::fabs(g.signed_rho));
      const double s_lo = std::sqrt(1.0 - std::fabs(g.signed_rho));
      const double root_half = std::sqrt(0.5);
      for (std::size_t k = 0; k < per_class; ++k, ++si) {
        ds.labels[si] = static_cast<int>(cls);
        // Row i of the sample: y ~ N(0, diag(spectrum)) rotated 45° in each
        // pair plane: x_a = (u+v)/√2, x_b = sign·(u−v)/√2 with u~N(0,1+|ρ|),
        // v~N(0,1−|ρ|) gives cov(x_a,x_b) = sign·ρ and unit variances.
        for (std::size_t i = 0; i < n; ++i) {
          std::vector<double> x(d, 0.0);
          std::vector<bool> filled(d, false);
          for (const auto& [a, b] : g.pairs) {
            const double u = s_hi * rng.normal();
            const double v = s_lo * rng.normal();
            x[a] = root_half * (u + v);
            x[b] = (g.signed_rho >= 0.0 ? 1.0 : -1.0) * root_half * (u - v);
            filled[a] = filled[b] = true;
          }
          for (std::size_t ch = 0; ch < d; ++ch)
            if (!filled[ch]) x[ch] = rng.normal();
          for (std::size_t ch = 0; ch < d; ++ch) {
            double px = kPixelMean + kPixelStd * x[ch];
            px = std::clamp(px, 0.0, 1.0);
            ds.images.at(si, ch)[i] = px;
          }
        }
      }
    }
    return ds;
  };

  return {make_split(spec.train_per_class, 0x7261696e, "train"),
          make_split(spec.test_per_class, 0x74657374, "test")};
}

namespace {

std::uint32_t read_be_u32(const std::string& in, std::size_t& off) {
  if (off + 4 > in.size()) throw ParseError("IDX: truncated header", off);
  const auto* b = reinterpret_cast<const unsigned char*>(in.data() + off);
  off += 4;
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset read_idx(const std::string& images_path, const std::string& labels_path) {
  Dataset ds;
  ds.split = "idx";
  ds.norm_mean = 0.0;
  ds.norm_std = 1.0;

  const std::string img = read_file(images_path);
  std::size_t off = 0;
  const std::uint32_t magic = read_be_u32(img, off);
  if (magic != 0x00000803)
    throw ParseError("IDX image file: expected magic 0x00000803, found 0x" +
                         [&] {
                           char buf[16];
                           std::snprintf(buf, sizeof(buf), "%08x", magic);
                           return std::string(buf);
                         }(),
                     0);
  const std::uint32_t count = read_be_u32(img, off);
  const std::uint32_t rows = read_be_u32(img, off);
  const std::uint32_t cols = read_be_u32(img, off);
  const std::size_t need = static_cast<std::size_t>(count) * rows * cols;
  if (img.size() - off < need)
    throw ParseError("IDX image file: payload truncated (expected " + std::to_string(need) +
                         " pixel bytes)",
                     off);
  ds.images = Tensor(count, 1, rows, cols);
  for (std::size_t i = 0; i < need; ++i)
    ds.images.v[i] = static_cast<unsigned char>(img[off + i]) / 255.0;

  if (!labels_path.empty()) {
    const std::string lab = read_file(labels_path);
    std::size_t loff = 0;
    const std::uint32_t lmagic = read_be_u32(lab, loff);
    if (lmagic != 0x00000801)
      throw ParseError("IDX label file: expected magic 0x00000801", 0);
    const std::uint32_t lcount = read_be_u32(lab, loff);
    if (lcount != count)
      throw ParseError("IDX label count " + std::to_string(lcount) +
                           " does not match image count " + std::to_string(count),
                       loff - 4);
    if (lab.size() - loff < lcount) throw ParseError("IDX label file: payload truncated", loff);
    ds.labels.resize(lcount);
    int max_label = 0;
    for (std::uint32_t i = 0; i < lcount; ++i) {
      ds.labels[i] = static_cast<unsigned char>(lab[loff + i]);
      max_label = std::max(max_label, ds.labels[i]);
    }
    ds.classes = static_cast<std::size_t>(max_label) + 1;
    ds.per_class_count.assign(ds.classes, 0);
    for (int l : ds.labels) ++ds.per_class_count[static_cast<std::size_t>(l)];
  }
  return ds;
}

Dataset read_cifar10_bin(const std::string& path) {
  const std::string in = read_file(path);
  constexpr std::size_t kRecord = 3073;  // 1 label byte + 3·32·32 pixels
  if (in.size() % kRecord != 0)
    throw ParseError("CIFAR-10: file size " + std::to_string(in.size()) +
                         " is not a multiple of 3073",
                     in.size() - in.size() % kRecord);
  const std::size_t count = in.size() / kRecord;

  Dataset ds;
  ds.split = "cifar10";
  ds.classes = 10;
  ds.norm_mean = 0.0;
  ds.norm_std = 1.0;
  ds.images = Tensor(count, 3, 32, 32);
  ds.labels.resize(count);
  ds.per_class_count.assign(10, 0);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t base = r * kRecord;
    const int label = static_cast<unsigned char>(in[base]);
    if (label >= 10)
      throw ParseError("CIFAR-10: record " + std::to_string(r) + " has label byte " +
                           std::to_string(label) + " >= 10",
                       base);
    ds.labels[r] = label;
    ++ds.per_class_count[static_cast<std::size_t>(label)];
    for (std::size_t c = 0; c < 3; ++c) {
      double* plane = ds.images.at(r, c);
      const std::size_t src = base + 1 + c * 1024;
      for (std::size_t i = 0; i < 1024; ++i)
        plane[i] = static_cast<unsigned char>(in[src + i]) / 255.0;
    }
  }
  return ds;
}

static constexpr char kDsMagic[8] = {'C', 'P', 'D', 'S', '0', '0', '0', '1'};

void save_dataset(const Dataset& ds, const std::string& path) {
  std::string out;
  out.append(kDsMagic, sizeof(kDsMagic));
  store_u64_le(out, ds.size());
  store_u32_le(out, static_cast<std::uint32_t>(ds.classes));
  store_u32_le(out, static_cast<std::uint32_t>(ds.images.c));
  store_u32_le(out, static_cast<std::uint32_t>(ds.images.h));
  store_u32_le(out, static_cast<std::uint32_t>(ds.images.w));
  store_f64_le(out, ds.norm_mean);
  store_f64_le(out, ds.norm_std);
  store_u32_le(out, static_cast<std::uint32_t>(ds.split.size()));
  out += ds.split;
  for (int l : ds.labels) store_u32_le(out, static_cast<std::uint32_t>(l));
  for (double v : ds.images.v) store_f64_le(out, v);
  write_file(path, out);
}

Dataset load_dataset(const std::string& path) {
  const std::string in = read_file(path);
  if (in.size() < sizeof(kDsMagic) || std::memcmp(in.data(), kDsMagic, sizeof(kDsMagic)) != 0)
    throw ParseError("dataset container magic mismatch (expected CPDS0001)", 0);
  std::size_t off = sizeof(kDsMagic);
  Dataset ds;
  const std::uint64_t count = load_u64_le(in, off);
  ds.classes = load_u32_le(in, off);
  const std::uint32_t c = load_u32_le(in, off);
  const std::uint32_t h = load_u32_le(in, off);
  const std::uint32_t w = load_u32_le(in, off);
  ds.norm_mean = load_f64_le(in, off);
  ds.norm_std = load_f64_le(in, off);
  const std::uint32_t split_len = load_u32_le(in, off);
  if (off + split_len > in.size()) throw ParseError("dataset container: truncated split name", off);
  ds.split = in.substr(off, split_len);
  off += split_len;
  ds.labels.resize(count);
  for (auto& l : ds.labels) l = static_cast<int>(load_u32_le(in, off));
  ds.images = Tensor(count, c, h, w);
  for (auto& v : ds.images.v) v = load_f64_le(in, off);
  if (off != in.size()) throw ParseError("dataset container: trailing bytes", off);
  if (ds.classes) {
    ds.per_class_count.assign(ds.classes, 0);
    for (int l : ds.labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= ds.classes)
        throw ParseError("dataset container: label out of range", off);
      ++ds.per_class_count[static_cast<std::size_t>(l)];
    }
  }
  return ds;
}

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Batch b;
  b.images = Tensor(indices.size(), ds.images.c, ds.images.h, ds.images.w);
  b.labels.resize(indices.size());
  const std::size_t per = ds.images.per_sample();
  const double inv_std = 1.0 / ds.norm_std;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= ds.size()) throw DomainError("make_batch: index out of range");
    const double* src = ds.images.v.data() + indices[i] * per;
    double* dst = b.images.v.data() + i * per;
    for (std::size_t k = 0; k < per; ++k) dst[k] = (src[k] - ds.norm_mean) * inv_std;
    b.labels[i] = ds.labels[indices[i]];
  }
  return b;
}

}  // namespace covpool
