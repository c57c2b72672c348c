#include "asyndiff/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "asyndiff/rng.hpp"

namespace asyndiff {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& vocab::names() {
  static const std::vector<std::string> n = {
      "<null>", "<bg>",   "red",    "green",   "blue",
      "yellow", "square", "circle", "triangle"};
  return n;
}

namespace {

struct Color {
  double r, g, b;
};

Color color_value(int token) {
  switch (token) {
    case vocab::kRed: return {1.0, -1.0, -1.0};
    case vocab::kGreen: return {-1.0, 1.0, -1.0};
    case vocab::kBlue: return {-1.0, -1.0, 1.0};
    case vocab::kYellow: return {1.0, 1.0, -1.0};
    default: throw std::logic_error("not a color token");
  }
}

struct Geometry {
  int shape_token;
  int cx, cy, size;  // size: half-extent (square/circle radius, triangle half-base)
};

Mask rasterize(const Geometry& g, int h, int w) {
  Mask m(h, w, 0.0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const int dx = c - g.cx, dy = r - g.cy;
      bool inside = false;
      switch (g.shape_token) {
        case vocab::kSquare:
          inside = std::abs(dx) <= g.size && std::abs(dy) <= g.size;
          break;
        case vocab::kCircle:
          inside = dx * dx + dy * dy <= g.size * g.size;
          break;
        case vocab::kTriangle:
          // upward triangle: apex at cy - size, base at cy + size
          inside = dy >= -g.size && dy <= g.size &&
                   std::abs(dx) <= (dy + g.size) / 2;
          break;
        default:
          throw std::logic_error("not a shape token");
      }
      if (inside) m.at(r, c) = 1.0;
    }
  return m;
}

size_t mask_area(const Mask& m) {
  size_t n = 0;
  for (double x : m.v) n += (x != 0.0);
  return n;
}

bool overlaps(const Mask& a, const Mask& b) {
  for (size_t p = 0; p < a.size(); ++p)
    if (a.v[p] != 0.0 && b.v[p] != 0.0) return true;
  return false;
}

}  // namespace

ShapesSample generate_shapes_sample(int dims, uint64_t seed, uint64_t index) {
  if (dims % 4 != 0) throw std::invalid_argument("dims must be divisible by 4");
  CounterRng rng(seed ^ 0x5368617065736d70ull, index);
  const int h = dims, w = dims;
  const size_t max_area = static_cast<size_t>(h) * w / 4;

  ShapesSample s;
  s.image = Grid3(3, h, w);
  for (auto& v : s.image.v) v = (rng.next_uniform() * 2.0 - 1.0) * 0.1;

  const int n_objects = 1 + static_cast<int>(rng.next_below(2));
  std::vector<Mask> placed;
  for (int obj = 0; obj < n_objects; ++obj) {
    const int color_tok = vocab::kRed + static_cast<int>(rng.next_below(4));
    Geometry geo{};
    Mask mask;
    bool ok = false;
    for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
      geo.shape_token = vocab::kSquare + static_cast<int>(rng.next_below(3));
      // half-extent range keeps area in [9, h*w/4] for all three shapes
      const int min_sz = geo.shape_token == vocab::kSquare ? 1 : 2;
      const int max_sz = std::max(min_sz, dims / 5);
      geo.size =
          min_sz + static_cast<int>(rng.next_below(max_sz - min_sz + 1));
      geo.cx = geo.size + static_cast<int>(
                              rng.next_below(std::max(1, w - 2 * geo.size)));
      geo.cy = geo.size + static_cast<int>(
                              rng.next_below(std::max(1, h - 2 * geo.size)));
      mask = rasterize(geo, h, w);
      const size_t area = mask_area(mask);
      if (area < 9 || area > max_area) continue;
      ok = true;
      for (const auto& other : placed)
        if (overlaps(mask, other)) ok = false;
    }
    if (!ok) continue;  // drop the object after bounded retries
    placed.push_back(mask);

    const Color col = color_value(color_tok);
    for (size_t p = 0; p < mask.size(); ++p)
      if (mask.v[p] != 0.0) {
        s.image.v[p] = col.r;
        s.image.v[mask.size() + p] = col.g;
        s.image.v[2 * mask.size() + p] = col.b;
      }

    ShapesObject so;
    so.token_indices = {static_cast<int>(s.caption.size()),
                        static_cast<int>(s.caption.size()) + 1};
    so.mask = std::move(mask);
    s.caption.push_back(color_tok);
    s.caption.push_back(geo.shape_token);
    s.objects.push_back(std::move(so));
  }
  s.caption.push_back(vocab::kBackground);
  if (s.objects.empty()) {
    // placement never failed 64 times in practice, but keep the sample valid
    return generate_shapes_sample(dims, seed, index ^ 0x9e3779b9ull);
  }
  return s;
}

ShapesDataset generate_shapes(int count, int dims, uint64_t seed) {
  ShapesDataset ds;
  ds.h = dims;
  ds.w = dims;
  ds.seed = seed;
  ds.samples.reserve(count);
  for (int i = 0; i < count; ++i)
    ds.samples.push_back(generate_shapes_sample(dims, seed, i));
  return ds;
}

void write_shapes_dataset(const ShapesDataset& ds, const std::string& dir) {
  fs::create_directories(dir);

  std::ofstream blob(fs::path(dir) / "images.bin", std::ios::binary);
  std::ofstream masks(fs::path(dir) / "masks.bin", std::ios::binary);
  if (!blob || !masks) throw std::runtime_error("cannot open dataset files");

  json manifest;
  manifest["format"] = "asyndiff-shapes-v1";
  manifest["size"] = ds.samples.size();
  manifest["height"] = ds.h;
  manifest["width"] = ds.w;
  manifest["channels"] = 3;
  manifest["seed"] = ds.seed;
  manifest["vocabulary"] = vocab::names();

  size_t img_offset = 0, mask_offset = 0;
  const size_t mask_bytes = (static_cast<size_t>(ds.h) * ds.w + 7) / 8;
  json records = json::array();
  for (const auto& s : ds.samples) {
    json rec;
    rec["caption"] = s.caption;
    rec["image_offset"] = img_offset;
    json objs = json::array();
    std::vector<float> fbuf(s.image.size());
    for (size_t i = 0; i < s.image.size(); ++i)
      fbuf[i] = static_cast<float>(s.image.v[i]);
    blob.write(reinterpret_cast<const char*>(fbuf.data()),
               fbuf.size() * sizeof(float));
    img_offset += fbuf.size() * sizeof(float);

    for (const auto& o : s.objects) {
      json jo;
      jo["token_indices"] = o.token_indices;
      jo["mask_offset"] = mask_offset;
      std::vector<uint8_t> bits(mask_bytes, 0);
      for (size_t p = 0; p < o.mask.size(); ++p)
        if (o.mask.v[p] != 0.0) bits[p / 8] |= (1u << (p % 8));
      masks.write(reinterpret_cast<const char*>(bits.data()), bits.size());
      mask_offset += bits.size();
      objs.push_back(std::move(jo));
    }
    rec["objects"] = std::move(objs);
    records.push_back(std::move(rec));
  }
  manifest["records"] = std::move(records);

  std::ofstream mf(fs::path(dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";
}

ShapesDataset read_shapes_dataset(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw std::runtime_error("missing manifest.json in " + dir);
  json manifest = json::parse(mf);
  if (manifest.at("format") != "asyndiff-shapes-v1")
    throw std::runtime_error("unsupported dataset format");

  ShapesDataset ds;
  ds.h = manifest.at("height");
  ds.w = manifest.at("width");
  ds.seed = manifest.at("seed");
  const size_t mask_bytes = (static_cast<size_t>(ds.h) * ds.w + 7) / 8;

  std::ifstream blob(fs::path(dir) / "images.bin", std::ios::binary);
  std::ifstream masks(fs::path(dir) / "masks.bin", std::ios::binary);
  if (!blob || !masks) throw std::runtime_error("missing dataset blobs");

  for (const auto& rec : manifest.at("records")) {
    ShapesSample s;
    s.caption = rec.at("caption").get<std::vector<int>>();
    s.image = Grid3(3, ds.h, ds.w);
    std::vector<float> fbuf(s.image.size());
    blob.seekg(rec.at("image_offset").get<size_t>());
    blob.read(reinterpret_cast<char*>(fbuf.data()),
              fbuf.size() * sizeof(float));
    for (size_t i = 0; i < fbuf.size(); ++i) s.image.v[i] = fbuf[i];

    for (const auto& jo : rec.at("objects")) {
      ShapesObject o;
      o.token_indices = jo.at("token_indices").get<std::vector<int>>();
      o.mask = Mask(ds.h, ds.w, 0.0);
      std::vector<uint8_t> bits(mask_bytes);
      masks.seekg(jo.at("mask_offset").get<size_t>());
      masks.read(reinterpret_cast<char*>(bits.data()), bits.size());
      for (size_t p = 0; p < o.mask.size(); ++p)
        o.mask.v[p] = (bits[p / 8] >> (p % 8)) & 1u ? 1.0 : 0.0;
      s.objects.push_back(std::move(o));
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

GaussianDataSpec make_gaussian_spec(int dims, GaussianStructure structure,
                                    double param, uint64_t seed) {
  const int d = dims * dims;
  GaussianDataSpec spec;
  spec.mean.resize(d);
  CounterRng rng(seed ^ 0x67617573737065ull);
  for (int i = 0; i < d; ++i) spec.mean[i] = 0.3 * rng.next_normal();

  spec.cov = Eigen::MatrixXd::Zero(d, d);
  if (structure == GaussianStructure::Isotropic) {
    spec.cov.diagonal().setConstant(param);
  } else {
    const double ell = param;
    for (int p = 0; p < d; ++p) {
      const int pr = p / dims, pc = p % dims;
      for (int q = 0; q < d; ++q) {
        const int qr = q / dims, qc = q % dims;
        const double d2 = static_cast<double>((pr - qr) * (pr - qr) +
                                              (pc - qc) * (pc - qc));
        spec.cov(p, q) = std::exp(-d2 / (2.0 * ell * ell));
      }
    }
  }
  spec.cov.diagonal().array() += 1e-8;
  spec.validate();
  return spec;
}

}  // namespace asyndiff
