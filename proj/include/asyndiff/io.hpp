#pragma once

#include <string>
#include <vector>

#include "asyndiff/attention.hpp"
#include "asyndiff/grid.hpp"
#include "asyndiff/sampler.hpp"
#include "asyndiff/tiny_net.hpp"

namespace asyndiff {

// Binary PPM (P6) for 3-channel grids, values affine-mapped [-1,1] -> [0,255].
void write_ppm(const Grid3& image, const std::string& path);

// Binary PGM (P5) for 1-channel grids (same mapping) or binary masks.
void write_pgm(const Grid2& image, const std::string& path, double lo = -1.0,
               double hi = 1.0);

// Trace CSV: header step,pixel_row,pixel_col,timestep,masked.
void write_trace_csv(const SampleDiagnostics& diag, const std::string& path);

struct TrainingMeta {
  int steps = 0;
  std::vector<double> loss_curve;
  uint64_t seed = 0;
  std::string dataset_fingerprint;
};

// Single-file checkpoint: JSON manifest followed by raw little-endian
// float64 parameter blocks in declared order.
void save_checkpoint(const TinyCondDenoiser& model, const TrainingMeta& meta,
                     const std::string& path);
TinyCondDenoiser load_checkpoint(const std::string& path,
                                 TrainingMeta* meta = nullptr);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace asyndiff
