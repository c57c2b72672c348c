#include "asyndiff/attention.hpp"

#include <algorithm>
#include <stdexcept>

namespace asyndiff {

namespace {

Grid2 resample_nearest(const Grid2& src, int th, int tw) {
  if (src.h == th && src.w == tw) return src;
  Grid2 out(th, tw);
  for (int r = 0; r < th; ++r) {
    const int sr = std::min(r * src.h / th, src.h - 1);
    for (int c = 0; c < tw; ++c) {
      const int sc = std::min(c * src.w / tw, src.w - 1);
      out.at(r, c) = src.at(sr, sc);
    }
  }
  return out;
}

}  // namespace

AttentionLayer aggregate_layers(const CrossAttentionMaps& maps, int target_h,
                                int target_w, LayerRule rule) {
  std::vector<const AttentionLayer*> selected;
  int ah = 0, aw = 0;
  if (rule == LayerRule::QuarterResolution) {
    for (const auto& l : maps.layers)
      if (l.h == target_h / 4 && l.w == target_w / 4) selected.push_back(&l);
    if (selected.empty())
      throw std::invalid_argument(
          "aggregate_layers: no layer at quarter resolution");
    ah = target_h / 4;
    aw = target_w / 4;
  } else {
    for (const auto& l : maps.layers) selected.push_back(&l);
    if (selected.empty())
      throw std::invalid_argument("aggregate_layers: no layers");
    for (const auto* l : selected) {
      ah = std::max(ah, l->h);
      aw = std::max(aw, l->w);
    }
  }

  const int n_tokens = selected.front()->n_tokens;
  for (const auto* l : selected)
    if (l->n_tokens != n_tokens)
      throw std::invalid_argument("aggregate_layers: token count mismatch");

  AttentionLayer out;
  out.n_tokens = n_tokens;
  out.h = ah;
  out.w = aw;
  out.maps.assign(n_tokens, Grid2(ah, aw));
  for (const auto* l : selected) {
    for (int o = 0; o < n_tokens; ++o) {
      const Grid2 m = resample_nearest(l->maps[o], ah, aw);
      for (size_t p = 0; p < m.size(); ++p) out.maps[o].v[p] += m.v[p];
    }
  }
  const double inv = 1.0 / static_cast<double>(selected.size());
  for (auto& m : out.maps)
    for (auto& x : m.v) x *= inv;
  return out;
}

Mask upsample_nearest(const Mask& m, int target_h, int target_w) {
  return resample_nearest(m, target_h, target_w);
}

Mask extract_mask(const AttentionLayer& aggregated,
                  const TokenSelection& selection, int target_h,
                  int target_w) {
  if (selection.object_indices.empty())
    throw std::invalid_argument("extract_mask: empty token selection");
  Mask acc(aggregated.h, aggregated.w, 0.0);
  for (int o : selection.object_indices) {
    if (o < 0 || o >= aggregated.n_tokens)
      throw std::out_of_range("extract_mask: token index out of range");
    const Grid2& a = aggregated.maps[o];
    double mean = 0.0;
    for (double x : a.v) mean += x;
    mean /= static_cast<double>(a.size());
    for (size_t p = 0; p < a.size(); ++p)
      if (a.v[p] > mean) acc.v[p] = 1.0;
  }
  return upsample_nearest(acc, target_h, target_w);
}

double iou(const Mask& mask, const Mask& reference) {
  require_same_shape(mask, reference, "iou");
  size_t inter = 0, uni = 0;
  for (size_t p = 0; p < mask.size(); ++p) {
    const bool a = mask.v[p] != 0.0;
    const bool b = reference.v[p] != 0.0;
    inter += (a && b);
    uni += (a || b);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace asyndiff
