#pragma once

#include <string>
#include <vector>

#include "asyndiff/attention.hpp"
#include "asyndiff/denoiser.hpp"
#include "asyndiff/grid.hpp"

namespace asyndiff {

// Closed vocabulary for the captioned-shapes dataset.
// 0 <null>, 1 <bg>, 2..5 colors, 6..8 shapes.
namespace vocab {
constexpr int kNull = 0;
constexpr int kBackground = 1;
constexpr int kRed = 2;
constexpr int kGreen = 3;
constexpr int kBlue = 4;
constexpr int kYellow = 5;
constexpr int kSquare = 6;
constexpr int kCircle = 7;
constexpr int kTriangle = 8;
constexpr int kSize = 9;
const std::vector<std::string>& names();
}  // namespace vocab

struct ShapesObject {
  std::vector<int> token_indices;  // positions in the caption
  Mask mask;
};

struct ShapesSample {
  Grid3 image;  // 3 x H x W, values in [-1, 1]
  std::vector<int> caption;
  std::vector<ShapesObject> objects;
};

struct ShapesDataset {
  int h = 0;
  int w = 0;
  uint64_t seed = 0;
  std::vector<ShapesSample> samples;
};

// Deterministic generator: 1-2 non-overlapping shapes per image on a
// low-amplitude noise background. dims must be divisible by 4.
ShapesDataset generate_shapes(int count, int dims, uint64_t seed);

ShapesSample generate_shapes_sample(int dims, uint64_t seed, uint64_t index);

void write_shapes_dataset(const ShapesDataset& ds, const std::string& dir);
ShapesDataset read_shapes_dataset(const std::string& dir);

enum class GaussianStructure { Isotropic, Smooth };

// Gaussian target over a dims x dims grid. Smooth uses a squared-
// exponential covariance exp(-d^2 / (2 l^2)) over grid distance, with
// 1e-8 diagonal jitter; the mean is drawn from the seed.
GaussianDataSpec make_gaussian_spec(int dims, GaussianStructure structure,
                                    double param, uint64_t seed);

}  // namespace asyndiff
