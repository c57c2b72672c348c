#pragma once

#include <memory>
#include <string>
#include <vector>

#include "asyndiff/denoiser.hpp"

namespace asyndiff {

// Fixed small architecture: 3x3 input conv, per-pixel sinusoidal timestep
// embedding added outside attention, two residual conv blocks (tanh),
// one cross-attention block at quarter resolution against learned token
// embeddings, 1x1 output projection. Periodic padding throughout.
struct TinyNetArch {
  int c_in = 3;
  int features = 32;      // F
  int time_embed = 32;    // E
  int d_key = 32;
  int token_embed = 32;
  int vocab = 9;
  double horizon = 50.0;  // timestep range for embedding frequencies
  int pool = 4;           // attention operates at (h/pool, w/pool)
};

struct ParamBlock {
  std::string name;
  size_t offset;
  size_t count;
};

class TinyCondDenoiser : public Denoiser {
 public:
  explicit TinyCondDenoiser(const TinyNetArch& arch);

  void init_random(uint64_t seed);

  const TinyNetArch& arch() const { return arch_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  DenoiserOutput predict(const Grid3& x, const TimestepField& field,
                         const std::vector<int>* tokens) const override;

  struct Cache;
  // Forward pass keeping intermediates for backward. `tokens` may be
  // null: the reserved null token (id 0) is used instead.
  DenoiserOutput forward(const Grid3& x, const TimestepField& field,
                         const std::vector<int>* tokens, Cache& cache) const;

  // Reverse pass; d_eps is dLoss/d(eps output). Accumulates into `grad`
  // (same layout as params()).
  void backward(const Cache& cache, const Grid3& d_eps,
                std::vector<double>* grad) const;

  struct Cache {
    Grid3 x;
    Grid2 field;
    std::vector<int> tokens;
    Grid3 h1, h2, h3;            // post-time-injection, post-res-blocks
    Grid3 rb1_a1, rb1_c1, rb1_a2;
    Grid3 rb2_a1, rb2_c1, rb2_a2;
    Grid3 pooled;                // F x hp x wp
    std::vector<double> q;       // hp*wp x d_key
    std::vector<double> tok_e;   // n_tok x token_embed
    std::vector<double> k;       // n_tok x d_key
    std::vector<double> vv;      // n_tok x F
    std::vector<double> attn;    // hp*wp x n_tok (softmax rows)
    std::vector<double> ctx;     // hp*wp x F (attention output)
    Grid3 h4;
    Grid3 a_out;                 // tanh(h4)
  };

 private:
  size_t block_offset(const char* name) const;
  const double* blk(const char* name) const {
    return params_.data() + block_offset(name);
  }
  double* gblk(std::vector<double>* g, const char* name) const {
    return g->data() + block_offset(name);
  }

  TinyNetArch arch_;
  std::vector<double> params_;
  std::vector<ParamBlock> blocks_;
};

// Sinusoidal embedding of a continuous timestep; frequencies geometric
// over [1/T, 1] (dim must be even).
void timestep_embedding(double t, double horizon, int dim, double* out);

}  // namespace asyndiff
