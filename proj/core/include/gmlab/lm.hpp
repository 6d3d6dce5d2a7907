#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gmlab/align.hpp"
#include "gmlab/mdn.hpp"
#include "gmlab/optim.hpp"
#include "gmlab/rng.hpp"
#include "gmlab/tensor.hpp"

namespace gmlab {

struct LmConfig {
  std::size_t vocab = 20;
  std::size_t dim = 16;  // model dim; must equal the acoustic feature dim
  std::size_t enc_layers = 1;
  std::size_t dec_layers = 2;
  std::size_t heads = 4;
  std::size_t ff = 32;
  std::size_t mixtures = 3;
  CovType cov_type = CovType::diagonal;
  bool regression = false;
  AlignMode align = AlignMode::st_gumbel;
  double s_hi = 2.0;
  double s_lo = 0.1;
  std::size_t max_len = 100;
  double stop_pos_weight = 5.0;
};

/// One synthetic utterance: token ids, acoustic frames {I,dim} and the
/// generator's ground-truth token index per frame.
struct Episode {
  std::vector<std::size_t> tokens;
  Tensor frames;  // {I, dim}, tape-detached
  std::vector<std::size_t> gt_alignment;
};

class GmmLm {
 public:
  GmmLm(const LmConfig& cfg, Rng& init_rng);

  /// Embedding + sinusoidal positions + self-attention stack; {J,dim}.
  Tensor encode_text(const std::vector<std::size_t>& tokens) const;

  struct TfResult {
    Tensor nll;        // mean per predicted frame
    Tensor stop;       // weighted BCE
    Tensor total;      // nll + stop
    std::vector<std::size_t> alignment_trace;  // length I, trace[0] = 0
  };
  /// Teacher-forced pass at alignment temperature `s`; `effective_len`
  /// limits the episode to its first frames (padding mask).
  TfResult teacher_forced_loss(const Episode& ep, Rng& rng, double s,
                               std::optional<std::size_t> effective_len = {},
                               bool greedy_align = false) const;

  struct GenResult {
    std::vector<std::vector<double>> frames;  // prompt + generated
    std::vector<std::size_t> alignment_trace;
    std::optional<std::size_t> stop_step;
    std::size_t prompt_len = 0;
  };
  GenResult generate(const std::vector<std::size_t>& tokens,
                     const std::vector<std::vector<double>>& prompt_frames,
                     double temperature, Rng& rng,
                     bool greedy_align = false) const;

  NamedParams parameters();
  const LmConfig& config() const { return cfg_; }

 private:
  struct Block {
    Tensor wq, wk, wv, wo;
    Tensor ln1_g, ln1_b, ln2_g, ln2_b;
    Tensor ff_w1, ff_b1, ff_w2, ff_b2;
  };
  Block make_block(Rng& rng) const;
  Tensor run_block(const Tensor& x, const Block& b, bool causal) const;
  Tensor decoder_states(const Tensor& contexts) const;
  Tensor head_raw(const Tensor& states) const;  // {T, raw_size}
  Tensor stop_logits(const Tensor& states) const;

  LmConfig cfg_;
  Tensor embedding_;  // {vocab, dim}
  std::vector<Block> enc_, dec_;
  Tensor head_w_, head_b_;
  Tensor stop_w_, stop_b_;
};

struct TrainMetrics {
  bool ok = true;  // false when a non-finite loss aborted the step
  double nll = 0.0;
  double stop = 0.0;
  double grad_norm = 0.0;
  double temperature = 0.0;
};

/// One optimizer step over a batch; per-episode rng substreams are
/// derived from (base seed, step, episode id) so results do not depend
/// on evaluation order.
TrainMetrics lm_train_step(GmmLm& model, std::span<const Episode> batch,
                           std::span<const std::size_t> episode_ids,
                           Adam& opt, const Rng& base, std::size_t step,
                           std::size_t total_steps);

}  // namespace gmlab
