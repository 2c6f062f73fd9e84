#include "fg/data.hpp"

#include <cmath>
#include <cstdio>
#include <memory>

#include "fg/common.hpp"

namespace fg {

std::vector<double> Dataset::train_label_dist() const {
  if (train_labels.empty() || n_classes <= 0) raise(Err::Contract, "dataset has no labels");
  std::vector<double> p(static_cast<size_t>(n_classes), 0.0);
  for (int y : train_labels) p[static_cast<size_t>(y)] += 1.0;
  for (double& v : p) v /= static_cast<double>(train_labels.size());
  return p;
}

// ---------------------------------------------------------------------
//  Synthetic generators
// ---------------------------------------------------------------------
namespace {

constexpr double kTau = 6.283185307179586;

struct Raw {
  std::vector<double> x;
  std::vector<int> y;
  int d = 0;
  int k = 0;
};

Raw gen_ring8(int n, Rng& rng) {
  Raw r;
  r.d = 2;
  r.k = 8;
  for (int i = 0; i < n; ++i) {
    int c = static_cast<int>(rng.below(8));
    double ang = kTau * c / 8.0;
    r.x.push_back(2.0 * std::cos(ang) + 0.1 * rng.normal());
    r.x.push_back(2.0 * std::sin(ang) + 0.1 * rng.normal());
    r.y.push_back(c);
  }
  return r;
}

Raw gen_grid25(int n, Rng& rng) {
  Raw r;
  r.d = 2;
  r.k = 25;
  for (int i = 0; i < n; ++i) {
    int c = static_cast<int>(rng.below(25));
    double cx = static_cast<double>(c % 5) - 2.0;
    double cy = static_cast<double>(c / 5) - 2.0;
    r.x.push_back(cx + 0.05 * rng.normal());
    r.x.push_back(cy + 0.05 * rng.normal());
    r.y.push_back(c);
  }
  return r;
}

Raw gen_two_moons(int n, Rng& rng) {
  Raw r;
  r.d = 2;
  r.k = 2;
  for (int i = 0; i < n; ++i) {
    int c = static_cast<int>(rng.below(2));
    double t = 3.141592653589793 * rng.uniform();
    double px, py;
    if (c == 0) {
      px = std::cos(t);
      py = std::sin(t);
    } else {
      px = 1.0 - std::cos(t);
      py = 0.5 - std::sin(t);
    }
    r.x.push_back(px + 0.1 * rng.normal());
    r.x.push_back(py + 0.1 * rng.normal());
    r.y.push_back(c);
  }
  return r;
}

Tensor take_rows(const std::vector<double>& x, int d, int lo, int hi) {
  Tensor t({hi - lo, d});
  for (int i = lo; i < hi; ++i)
    for (int j = 0; j < d; ++j) t.at(i - lo, j) = x[static_cast<size_t>(i) * d + j];
  return t;
}

} // namespace

Dataset make_synthetic(const std::string& name, int n, uint64_t seed) {
  if (n < 10) raise(Err::Contract, "make_synthetic: n must be at least 10");
  Rng rng = Rng::derive(seed, "synthetic:" + name);
  Raw raw;
  if (name == "ring8")
    raw = gen_ring8(n, rng);
  else if (name == "grid25")
    raw = gen_grid25(n, rng);
  else if (name == "two_moons")
    raw = gen_two_moons(n, rng);
  else
    raise(Err::Unsupported, "unknown synthetic dataset '" + name + "'");

  int n_train = n * 8 / 10;
  int n_val = n / 10;
  int n_test = n - n_train - n_val;
  if (n_test < 1) raise(Err::Contract, "make_synthetic: n too small to split");

  Dataset ds;
  ds.train = take_rows(raw.x, raw.d, 0, n_train);
  ds.val = take_rows(raw.x, raw.d, n_train, n_train + n_val);
  ds.test = take_rows(raw.x, raw.d, n_train + n_val, n);
  ds.train_labels.assign(raw.y.begin(), raw.y.begin() + n_train);
  ds.val_labels.assign(raw.y.begin() + n_train, raw.y.begin() + n_train + n_val);
  ds.test_labels.assign(raw.y.begin() + n_train + n_val, raw.y.end());
  ds.n_classes = raw.k;
  ds.discrete = false;
  ds.provenance = "synthetic:" + name + ":n=" + std::to_string(n) + ":seed=" + std::to_string(seed);
  return ds;
}

// ---------------------------------------------------------------------
//  IDX files
// ---------------------------------------------------------------------
namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) fclose(f);
  }
};
using File = std::unique_ptr<FILE, FileCloser>;

uint32_t read_be32(FILE* f, const std::string& path, long offset) {
  unsigned char b[4];
  if (fread(b, 1, 4, f) != 4)
    raise(Err::Format, strf("%s: truncated at byte %ld (expected 4 more bytes)", path.c_str(), offset));
  return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
         (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

} // namespace

Tensor load_idx_images(const std::string& path) {
  File f(fopen(path.c_str(), "rb"));
  if (!f) raise(Err::Io, "cannot open '" + path + "'");
  uint32_t magic = read_be32(f.get(), path, 0);
  if (magic != 0x00000803u)
    raise(Err::Format, strf("%s: bad magic 0x%08x at byte 0 (want 0x00000803)", path.c_str(), magic));
  uint32_t n = read_be32(f.get(), path, 4);
  uint32_t rows = read_be32(f.get(), path, 8);
  uint32_t cols = read_be32(f.get(), path, 12);
  size_t count = static_cast<size_t>(n) * rows * cols;
  std::vector<unsigned char> buf(count);
  size_t got = fread(buf.data(), 1, count, f.get());
  if (got != count)
    raise(Err::Format, strf("%s: truncated payload, expected %zu bytes, got %zu", path.c_str(), count, got));
  Tensor t({static_cast<int>(n), static_cast<int>(rows), static_cast<int>(cols)});
  for (size_t i = 0; i < count; ++i) t[static_cast<int>(i)] = static_cast<double>(buf[i]);
  return t;
}

std::vector<int> load_idx_labels(const std::string& path) {
  File f(fopen(path.c_str(), "rb"));
  if (!f) raise(Err::Io, "cannot open '" + path + "'");
  uint32_t magic = read_be32(f.get(), path, 0);
  if (magic != 0x00000801u)
    raise(Err::Format, strf("%s: bad magic 0x%08x at byte 0 (want 0x00000801)", path.c_str(), magic));
  uint32_t n = read_be32(f.get(), path, 4);
  std::vector<unsigned char> buf(n);
  size_t got = fread(buf.data(), 1, n, f.get());
  if (got != n) raise(Err::Format, strf("%s: truncated payload, expected %u bytes, got %zu", path.c_str(), n, got));
  std::vector<int> labels(n);
  for (uint32_t i = 0; i < n; ++i) labels[i] = buf[i];
  return labels;
}

namespace {

// Flatten [n,r,c] images to [n, r*c], optionally average-pooling 2x2.
Tensor flatten_images(const Tensor& imgs, bool pool14, const std::string& path) {
  if (imgs.ndim() != 3) raise(Err::Format, path + ": image tensor must be rank 3");
  int n = imgs.dim(0), r = imgs.dim(1), c = imgs.dim(2);
  if (!pool14) {
    Tensor out({n, r * c});
    for (int i = 0; i < out.size(); ++i) out[i] = imgs[i];
    return out;
  }
  if (r % 2 != 0 || c % 2 != 0) raise(Err::Format, path + ": pooling requires even image sides");
  int rr = r / 2, cc = c / 2;
  Tensor out({n, rr * cc});
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < rr; ++a)
      for (int b = 0; b < cc; ++b) {
        double s = 0.0;
        for (int da = 0; da < 2; ++da)
          for (int db = 0; db < 2; ++db) s += imgs[(i * r + 2 * a + da) * c + 2 * b + db];
        // keep integer pixel range for the dequantization contract
        out.at(i, a * cc + b) = std::floor(s / 4.0);
      }
  return out;
}

} // namespace

Dataset load_idx_dataset(const std::string& images, const std::string& labels,
                         const std::string& test_images, const std::string& test_labels,
                         bool pool14, uint64_t seed) {
  Tensor all = flatten_images(load_idx_images(images), pool14, images);
  std::vector<int> all_y;
  if (!labels.empty()) all_y = load_idx_labels(labels);
  if (!all_y.empty() && static_cast<int>(all_y.size()) != all.dim(0))
    raise(Err::Format, "image/label counts differ");

  int n = all.dim(0), d = all.dim(1);
  int n_val = n / 10;
  if (n_val < 1) raise(Err::Format, "too few images for a validation split");

  // Seeded permutation; the first n_val indices become validation.
  std::vector<int> perm(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
  Rng rng = Rng::derive(seed, "idx_split");
  for (int i = n - 1; i > 0; --i) std::swap(perm[static_cast<size_t>(i)], perm[rng.below(static_cast<uint64_t>(i + 1))]);

  Dataset ds;
  ds.val = Tensor({n_val, d});
  ds.train = Tensor({n - n_val, d});
  for (int i = 0; i < n; ++i) {
    Tensor& dst = i < n_val ? ds.val : ds.train;
    int row = i < n_val ? i : i - n_val;
    int src = perm[static_cast<size_t>(i)];
    for (int j = 0; j < d; ++j) dst.at(row, j) = all.at(src, j);
    if (!all_y.empty()) (i < n_val ? ds.val_labels : ds.train_labels).push_back(all_y[static_cast<size_t>(src)]);
  }

  if (!test_images.empty()) {
    ds.test = flatten_images(load_idx_images(test_images), pool14, test_images);
    if (!test_labels.empty()) ds.test_labels = load_idx_labels(test_labels);
  } else {
    // No separate test files: reuse the validation split so every split exists.
    ds.test = ds.val;
    ds.test_labels = ds.val_labels;
  }

  if (!ds.train_labels.empty()) {
    int k = 0;
    for (int y : ds.train_labels) k = std::max(k, y + 1);
    ds.n_classes = k;
  }
  ds.discrete = true;
  ds.provenance = "idx:" + images;
  return ds;
}

} // namespace fg
