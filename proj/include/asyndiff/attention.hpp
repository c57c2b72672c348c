#pragma once

#include <set>
#include <vector>

#include "asyndiff/grid.hpp"

namespace asyndiff {

// One layer of token-to-pixel attention weights: maps[o] is the h x w
// attention of every query pixel on token o; rows over the token axis
// sum to 1 (softmax).
struct AttentionLayer {
  int n_tokens = 0;
  int h = 0;
  int w = 0;
  std::vector<Grid2> maps;  // one grid per token
};

struct CrossAttentionMaps {
  std::vector<AttentionLayer> layers;
};

struct TokenSelection {
  std::set<int> object_indices;
};

// Binary h x w mask (entries 0/1).
using Mask = Grid2;

enum class LayerRule { QuarterResolution, AllLayers };

// Mean over the selected layers. QuarterResolution keeps layers at
// (h/4, w/4) of the target; AllLayers resamples every layer (nearest
// neighbor) to the largest layer resolution first.
AttentionLayer aggregate_layers(const CrossAttentionMaps& maps, int target_h,
                                int target_w, LayerRule rule);

// Per-token above-mean thresholding (strict >), OR across the selected
// tokens, then nearest-neighbor upsample to the target resolution.
Mask extract_mask(const AttentionLayer& aggregated,
                  const TokenSelection& selection, int target_h, int target_w);

Mask upsample_nearest(const Mask& m, int target_h, int target_w);

// |intersection| / |union|; 1.0 when both masks are empty.
double iou(const Mask& mask, const Mask& reference);

}  // namespace asyndiff
