#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gmlab/config.hpp"
#include "gmlab/corpus.hpp"
#include "gmlab/lm.hpp"
#include "gmlab/vae.hpp"

namespace gmlab {

struct EvalOptions {
  std::size_t gen_episodes = 16;   // cap on generation-based metrics
  std::size_t diversity_samples = 3;
  double temperature = 0.0;        // sampling temperature for generation
};

struct EvalMetrics {
  double nll = 0.0;         // teacher-forced, greedy deterministic alignment
  double stop_loss = 0.0;
  double align_acc = 0.0;   // mean over frames of 1[trace = gt]
  double length_err = 0.0;  // mean |len(gen) - I| / I
  double diversity = 0.0;   // mean pairwise frame L2 over 3 generations
};

/// Deterministic evaluation: teacher forcing uses greedy alignment, and
/// every generation draws from a substream of `base` fixed by (episode,
/// sample), so results do not depend on call order.
EvalMetrics evaluate_lm(const GmmLm& model, std::span<const Episode> episodes,
                        const Rng& base, const EvalOptions& opts = {});

/// Mean per-entry reconstruction MSE over the episodes.
double evaluate_vae(const GmmVae& model, std::span<const Episode> episodes);

/// Metrics CSV with the fixed schema
/// `step,nll,stop_loss,align_acc,grad_norm,temperature`.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);  // IoError on failure
  ~MetricsWriter();
  void row(std::size_t step, double nll, double stop_loss, double align_acc,
           double grad_norm, double temperature);

 private:
  std::ofstream* out_;
};

/// Alignment dumps: CSV with 6 decimal places and 8-bit P2 PGM scaled so
/// the max cell maps to 255 (all-zero matrices stay all zero).
void write_alignment_csv(const std::string& path,
                         const std::vector<std::vector<double>>& alpha);
void write_alignment_pgm(const std::string& path,
                         const std::vector<std::vector<double>>& alpha);

struct TrainLogEntry {
  std::size_t step;  // number of optimizer steps taken at eval time
  EvalMetrics metrics;
  double grad_norm;
  double temperature;
};

struct LmTrainResult {
  std::vector<TrainLogEntry> log;  // entry 0 is the untrained baseline
  EvalMetrics final_metrics;
};

/// Full training loop: batches cycle through the corpus in order, evals
/// run before the first step, every `eval_interval` steps, and after the
/// last; each eval appends a metrics-CSV row when `metrics_path` is
/// non-empty.  `progress` (optional) receives one line per eval.
LmTrainResult train_lm(GmmLm& model, const Corpus& corpus,
                       const RunConfig& cfg, const std::string& metrics_path,
                       std::ostream* progress = nullptr);

struct VaeTrainResult {
  double final_recon = 0.0;  // mean per-entry MSE over the corpus
  double final_reg = 0.0;
};

/// Same loop shape for the VAE; CSV columns map as nll=total loss,
/// stop_loss=regularizer, align_acc=recon MSE, temperature=lambda.
VaeTrainResult train_vae(GmmVae& model, const Corpus& corpus,
                         const RunConfig& cfg, const std::string& metrics_path,
                         std::ostream* progress = nullptr);

}  // namespace gmlab
