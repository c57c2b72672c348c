#include "asyndiff/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace asyndiff {

using nlohmann::json;

namespace {
uint8_t to_byte(double v, double lo, double hi) {
  const double u = (v - lo) / (hi - lo);
  return static_cast<uint8_t>(std::clamp(std::lround(u * 255.0), 0l, 255l));
}
}  // namespace

void write_ppm(const Grid3& image, const std::string& path) {
  if (image.c != 3) throw std::invalid_argument("write_ppm: need 3 channels");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "P6\n" << image.w << " " << image.h << "\n255\n";
  const size_t d = static_cast<size_t>(image.h) * image.w;
  for (size_t p = 0; p < d; ++p) {
    for (int c = 0; c < 3; ++c) {
      const uint8_t b = to_byte(image.v[c * d + p], -1.0, 1.0);
      f.write(reinterpret_cast<const char*>(&b), 1);
    }
  }
}

void write_pgm(const Grid2& image, const std::string& path, double lo,
               double hi) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "P5\n" << image.w << " " << image.h << "\n255\n";
  for (double v : image.v) {
    const uint8_t b = to_byte(v, lo, hi);
    f.write(reinterpret_cast<const char*>(&b), 1);
  }
}

void write_trace_csv(const SampleDiagnostics& diag, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "step,pixel_row,pixel_col,timestep,masked\n";
  for (size_t s = 0; s < diag.field_snapshots.size(); ++s) {
    const auto& field = diag.field_snapshots[s];
    const auto& mask = diag.mask_snapshots[s];
    for (int r = 0; r < field.values.h; ++r)
      for (int c = 0; c < field.values.w; ++c)
        f << field.step_index << "," << r << "," << c << ","
          << field.values.at(r, c) << ","
          << (mask.at(r, c) != 0.0 ? 1 : 0) << "\n";
  }
}

namespace {
constexpr char kCkptMagic[8] = {'A', 'D', 'C', 'K', 'P', 'T', '0', '1'};
}

void save_checkpoint(const TinyCondDenoiser& model, const TrainingMeta& meta,
                     const std::string& path) {
  const auto& arch = model.arch();
  json manifest;
  manifest["format"] = "asyndiff-checkpoint-v1";
  manifest["arch"] = {{"c_in", arch.c_in},
                      {"features", arch.features},
                      {"time_embed", arch.time_embed},
                      {"d_key", arch.d_key},
                      {"token_embed", arch.token_embed},
                      {"vocab", arch.vocab},
                      {"horizon", arch.horizon},
                      {"pool", arch.pool}};
  json blocks = json::array();
  for (const auto& b : model.blocks())
    blocks.push_back({{"name", b.name}, {"count", b.count}});
  manifest["blocks"] = std::move(blocks);
  manifest["training"] = {{"steps", meta.steps},
                          {"loss_curve", meta.loss_curve},
                          {"seed", meta.seed},
                          {"dataset_fingerprint", meta.dataset_fingerprint}};

  const std::string js = manifest.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.write(kCkptMagic, 8);
  const uint64_t len = js.size();
  f.write(reinterpret_cast<const char*>(&len), 8);
  f.write(js.data(), js.size());
  f.write(reinterpret_cast<const char*>(model.params().data()),
          model.params().size() * sizeof(double));
}

TinyCondDenoiser load_checkpoint(const std::string& path, TrainingMeta* meta) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (std::memcmp(magic, kCkptMagic, 8) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), 8);
  std::string js(len, '\0');
  f.read(js.data(), len);
  json manifest = json::parse(js);
  if (manifest.at("format") != "asyndiff-checkpoint-v1")
    throw std::runtime_error("unsupported checkpoint format");

  TinyNetArch arch;
  const auto& ja = manifest.at("arch");
  arch.c_in = ja.at("c_in");
  arch.features = ja.at("features");
  arch.time_embed = ja.at("time_embed");
  arch.d_key = ja.at("d_key");
  arch.token_embed = ja.at("token_embed");
  arch.vocab = ja.at("vocab");
  arch.horizon = ja.at("horizon");
  arch.pool = ja.at("pool");

  TinyCondDenoiser model(arch);
  // declared order must match
  const auto& jb = manifest.at("blocks");
  if (jb.size() != model.blocks().size())
    throw std::runtime_error("checkpoint block table mismatch");
  for (size_t i = 0; i < jb.size(); ++i) {
    if (jb[i].at("name") != model.blocks()[i].name ||
        jb[i].at("count") != model.blocks()[i].count)
      throw std::runtime_error("checkpoint block table mismatch");
  }
  f.read(reinterpret_cast<char*>(model.params().data()),
         model.params().size() * sizeof(double));
  if (!f) throw std::runtime_error("truncated checkpoint: " + path);

  if (meta) {
    const auto& jt = manifest.at("training");
    meta->steps = jt.at("steps");
    meta->loss_curve = jt.at("loss_curve").get<std::vector<double>>();
    meta->seed = jt.at("seed");
    meta->dataset_fingerprint = jt.at("dataset_fingerprint");
  }
  return model;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << content;
}

}  // namespace asyndiff
