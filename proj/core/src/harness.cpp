#include "gmlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>

#include "gmlab/error.hpp"

namespace gmlab {

namespace {

double pair_distance(const std::vector<std::vector<double>>& a,
                     const std::vector<std::vector<double>>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    double sq = 0.0;
    for (std::size_t d = 0; d < a[t].size(); ++d) {
      const double diff = a[t][d] - b[t][d];
      sq += diff * diff;
    }
    acc += std::sqrt(sq);
  }
  return acc / static_cast<double>(n);
}

}  // namespace

EvalMetrics evaluate_lm(const GmmLm& model, std::span<const Episode> episodes,
                        const Rng& base, const EvalOptions& opts) {
  if (episodes.empty()) throw ContractError("evaluate_lm: no episodes");
  EvalMetrics m;
  std::size_t frame_total = 0, frame_hits = 0, scored = 0;

  for (const auto& ep : episodes) {
    if (ep.frames.shape()[1] != model.config().dim) {
      throw ContractError("evaluate_lm: frame dim != model dim");
    }
    if (ep.frames.shape()[0] < 2) continue;
    Rng dummy(0);
    auto res = model.teacher_forced_loss(ep, dummy, model.config().s_lo, {},
                                         /*greedy_align=*/true);
    m.nll += res.nll.item();
    m.stop_loss += res.stop.item();
    for (std::size_t k = 0; k < res.alignment_trace.size(); ++k) {
      ++frame_total;
      if (res.alignment_trace[k] == ep.gt_alignment[k]) ++frame_hits;
    }
    ++scored;
  }
  if (scored == 0) throw ContractError("evaluate_lm: all episodes too short");
  m.nll /= static_cast<double>(scored);
  m.stop_loss /= static_cast<double>(scored);
  m.align_acc = static_cast<double>(frame_hits) / frame_total;

  const std::size_t gen_n = std::min<std::size_t>(opts.gen_episodes,
                                                  episodes.size());
  const std::size_t S = std::max<std::size_t>(1, opts.diversity_samples);
  const bool greedy = opts.temperature == 0.0;
  std::size_t pairs_total = 0;
  double div_sum = 0.0, len_sum = 0.0;
  for (std::size_t i = 0; i < gen_n; ++i) {
    const Episode& ep = episodes[i];
    std::vector<std::vector<std::vector<double>>> gens;
    gens.reserve(S);
    for (std::size_t s = 0; s < S; ++s) {
      Rng g = base.substream(1 + i).substream(s);
      auto r = model.generate(ep.tokens, {}, opts.temperature, g, greedy);
      gens.push_back(std::move(r.frames));
    }
    const double I = static_cast<double>(ep.frames.shape()[0]);
    len_sum += std::abs(static_cast<double>(gens[0].size()) - I) / I;
    for (std::size_t a = 0; a < S; ++a) {
      for (std::size_t b = a + 1; b < S; ++b) {
        div_sum += pair_distance(gens[a], gens[b]);
        ++pairs_total;
      }
    }
  }
  if (gen_n > 0) m.length_err = len_sum / static_cast<double>(gen_n);
  if (pairs_total > 0) m.diversity = div_sum / static_cast<double>(pairs_total);
  return m;
}

double evaluate_vae(const GmmVae& model, std::span<const Episode> episodes) {
  if (episodes.empty()) throw ContractError("evaluate_vae: no episodes");
  double acc = 0.0;
  for (const auto& ep : episodes) {
    const Tensor& x = ep.frames;
    Tensor xhat = model.decode(model.encode(x), x.shape()[0]);
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x.values()[i] - xhat.values()[i];
      sq += d * d;
    }
    acc += sq / static_cast<double>(x.size());
  }
  return acc / static_cast<double>(episodes.size());
}

MetricsWriter::MetricsWriter(const std::string& path)
    : out_(new std::ofstream(path, std::ios::trunc)) {
  if (!*out_) {
    delete out_;
    out_ = nullptr;
    throw IoError("MetricsWriter: cannot open " + path);
  }
  *out_ << "step,nll,stop_loss,align_acc,grad_norm,temperature\n";
}

MetricsWriter::~MetricsWriter() { delete out_; }

void MetricsWriter::row(std::size_t step, double nll, double stop_loss,
                        double align_acc, double grad_norm,
                        double temperature) {
  *out_ << step << "," << std::setprecision(12) << nll << "," << stop_loss
        << "," << align_acc << "," << grad_norm << "," << temperature << "\n";
  out_->flush();
}

void write_alignment_csv(const std::string& path,
                         const std::vector<std::vector<double>>& alpha) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_alignment_csv: cannot open " + path);
  out << std::fixed << std::setprecision(6);
  for (const auto& row : alpha) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      out << (j ? "," : "") << row[j];
    }
    out << "\n";
  }
  if (!out) throw IoError("write_alignment_csv: write failed for " + path);
}

void write_alignment_pgm(const std::string& path,
                         const std::vector<std::vector<double>>& alpha) {
  if (alpha.empty() || alpha[0].empty()) {
    throw ContractError("write_alignment_pgm: empty matrix");
  }
  double mx = 0.0;
  for (const auto& row : alpha) {
    for (double v : row) mx = std::max(mx, v);
  }
  const double scale = mx > 0.0 ? 255.0 / mx : 0.0;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_alignment_pgm: cannot open " + path);
  out << "P2\n" << alpha[0].size() << " " << alpha.size() << "\n255\n";
  for (const auto& row : alpha) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      const long px = std::lround(row[j] * scale);
      out << (j ? " " : "") << std::clamp(px, 0L, 255L);
    }
    out << "\n";
  }
  if (!out) throw IoError("write_alignment_pgm: write failed for " + path);
}

LmTrainResult train_lm(GmmLm& model, const Corpus& corpus,
                       const RunConfig& cfg, const std::string& metrics_path,
                       std::ostream* progress) {
  if (corpus.episodes.empty()) throw ContractError("train_lm: empty corpus");
  if (corpus.spec.feat_dim != model.config().dim) {
    throw ContractError("train_lm: corpus feat dim != model dim");
  }
  const std::size_t n_eval =
      std::min<std::size_t>(cfg.eval_episodes, corpus.episodes.size());
  std::span<const Episode> eval_set(corpus.episodes.data(), n_eval);
  const Rng base(cfg.seed);
  const Rng eval_base = base.substream(0xE7A1);
  Adam opt(cfg.opt);

  std::unique_ptr<MetricsWriter> csv;
  if (!metrics_path.empty()) csv = std::make_unique<MetricsWriter>(metrics_path);

  LmTrainResult result;
  double last_grad_norm = 0.0;
  double last_temp = model.config().s_hi;
  auto do_eval = [&](std::size_t steps_done) {
    EvalMetrics em = evaluate_lm(model, eval_set, eval_base);
    if (csv) {
      csv->row(steps_done, em.nll, em.stop_loss, em.align_acc, last_grad_norm,
               last_temp);
    }
    if (progress) {
      *progress << "step " << steps_done << " nll " << em.nll << " stop "
                << em.stop_loss << " align_acc " << em.align_acc << " temp "
                << last_temp << "\n";
    }
    result.log.push_back({steps_done, em, last_grad_norm, last_temp});
  };

  do_eval(0);
  std::vector<Episode> batch(cfg.batch);
  std::vector<std::size_t> ids(cfg.batch);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (std::size_t i = 0; i < cfg.batch; ++i) {
      ids[i] = (step * cfg.batch + i) % corpus.episodes.size();
      batch[i] = corpus.episodes[ids[i]];
    }
    TrainMetrics tm = lm_train_step(model, batch, ids, opt, base, step,
                                    cfg.steps);
    last_grad_norm = tm.grad_norm;
    last_temp = tm.temperature;
    const std::size_t done = step + 1;
    if (done % cfg.eval_interval == 0 || done == cfg.steps) do_eval(done);
  }
  result.final_metrics = result.log.back().metrics;
  return result;
}

VaeTrainResult train_vae(GmmVae& model, const Corpus& corpus,
                         const RunConfig& cfg, const std::string& metrics_path,
                         std::ostream* progress) {
  if (corpus.episodes.empty()) throw ContractError("train_vae: empty corpus");
  if (corpus.spec.feat_dim != model.config().feat_dim) {
    throw ContractError("train_vae: corpus feat dim != model feat dim");
  }
  const std::size_t n_eval =
      std::min<std::size_t>(cfg.eval_episodes, corpus.episodes.size());
  std::span<const Episode> eval_set(corpus.episodes.data(), n_eval);
  const Rng base(cfg.seed);
  Adam opt(cfg.opt);

  std::unique_ptr<MetricsWriter> csv;
  if (!metrics_path.empty()) csv = std::make_unique<MetricsWriter>(metrics_path);

  VaeTrainResult result;
  double last_grad_norm = 0.0;
  auto do_eval = [&](std::size_t steps_done) {
    const double recon = evaluate_vae(model, eval_set);
    double total = 0.0, reg = 0.0;
    for (const auto& ep : eval_set) {
      auto l = model.loss(ep.frames, nullptr);
      total += l.total.item();
      reg += l.reg.item();
    }
    total /= static_cast<double>(eval_set.size());
    reg /= static_cast<double>(eval_set.size());
    if (csv) {
      csv->row(steps_done, total, reg, recon, last_grad_norm,
               model.config().lambda);
    }
    if (progress) {
      *progress << "step " << steps_done << " total " << total << " recon "
                << recon << " reg " << reg << "\n";
    }
    result.final_recon = recon;
    result.final_reg = reg;
  };

  do_eval(0);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<Tensor> losses;
    losses.reserve(cfg.batch);
    for (std::size_t i = 0; i < cfg.batch; ++i) {
      const std::size_t id = (step * cfg.batch + i) % corpus.episodes.size();
      Rng noise = base.substream(step).substream(id);
      losses.push_back(model.loss(corpus.episodes[id].frames, &noise).total);
    }
    Tensor loss = mul_scalar(sum(concat(losses, 0)),
                             1.0 / static_cast<double>(losses.size()));
    backward(loss);
    auto params = model.parameters();
    last_grad_norm = opt.step(params);
    const std::size_t done = step + 1;
    if (done % cfg.eval_interval == 0 || done == cfg.steps) do_eval(done);
  }
  return result;
}

}  // namespace gmlab
