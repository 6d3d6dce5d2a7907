// gmlab: command-line front end for the mixture-model laboratory.
//
// Subcommands: gen-data, train-vae, train-lm, synth, eval, align-dump,
// self-test, sweep.  Exit codes: 0 success, 1 contract violation or bad
// usage, 2 I/O error.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gmlab/checkpoint.hpp"
#include "gmlab/config.hpp"
#include "gmlab/corpus.hpp"
#include "gmlab/error.hpp"
#include "gmlab/grad_check.hpp"
#include "gmlab/harness.hpp"

namespace fs = std::filesystem;
using namespace gmlab;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string ckpt;
  std::string align_mode;
  std::optional<std::size_t> mixtures;
  std::string cov;
  std::optional<double> lambda;
  double temperature = 0.0;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> max_len;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "key=value config file");
  cmd->add_option("--seed", o.seed, "run seed (GMLAB_SEED overrides)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--ckpt", o.ckpt, "checkpoint path");
  cmd->add_option("--align-mode", o.align_mode,
                  "st_gumbel|gumbel|noise|soft|cross");
  cmd->add_option("--mixtures", o.mixtures, "mixture components");
  cmd->add_option("--cov", o.cov, "diag|full");
  cmd->add_option("--lambda", o.lambda, "prior regularizer weight");
  cmd->add_option("--temperature", o.temperature, "sampling temperature");
  cmd->add_option("--steps", o.steps, "training steps");
  cmd->add_option("--max-len", o.max_len, "generation length cap");
}

RunConfig resolve_config(const CommonOpts& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) cfg = load_config(o.config_path);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.corpus.seed = *o.seed;
  }
  if (const char* env = std::getenv("GMLAB_SEED")) {
    cfg.seed = std::stoull(env);
    cfg.corpus.seed = cfg.seed;
  }
  if (!o.align_mode.empty()) {
    const auto m = parse_align_mode(o.align_mode);
    if (!m) throw ContractError("unknown align mode: " + o.align_mode);
    cfg.lm.align = *m;
  }
  if (o.mixtures) {
    cfg.lm.mixtures = *o.mixtures;
    cfg.vae.prior.mixtures = *o.mixtures;
  }
  if (!o.cov.empty()) {
    if (o.cov == "diag") {
      cfg.lm.cov_type = CovType::diagonal;
    } else if (o.cov == "full") {
      cfg.lm.cov_type = CovType::full;
    } else {
      throw ContractError("unknown cov type: " + o.cov);
    }
  }
  if (o.lambda) {
    cfg.vae.lambda = *o.lambda;
    cfg.vae.prior.lambda = *o.lambda;
  }
  if (o.steps) cfg.steps = *o.steps;
  if (o.max_len) cfg.lm.max_len = *o.max_len;
  // the LM consumes raw corpus frames, so the dims must agree
  cfg.lm.vocab = cfg.corpus.vocab;
  cfg.lm.dim = cfg.corpus.feat_dim;
  cfg.vae.feat_dim = cfg.corpus.feat_dim;
  return cfg;
}

void ensure_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir);
}

int cmd_gen_data(const CommonOpts& o) {
  const RunConfig cfg = resolve_config(o);
  ensure_out(o.out);
  Corpus c = gen_corpus(cfg.corpus);
  const std::string path = o.out + "/corpus.bin";
  save_corpus(path, c);
  std::cout << "wrote " << path << " (" << c.episodes.size() << " episodes)\n";
  return 0;
}

Corpus corpus_for(const RunConfig& cfg, const CommonOpts& o) {
  const std::string path = o.out + "/corpus.bin";
  if (fs::exists(path)) return load_corpus(path);
  return gen_corpus(cfg.corpus);
}

int cmd_train_vae(const CommonOpts& o) {
  const RunConfig cfg = resolve_config(o);
  ensure_out(o.out);
  Corpus c = corpus_for(cfg, o);
  Rng init(cfg.seed);
  GmmVae model(cfg.vae, init);
  auto result = train_vae(model, c, cfg, o.out + "/vae_metrics.csv",
                          &std::cout);
  auto params = model.parameters();
  const std::string ckpt = o.ckpt.empty() ? o.out + "/vae.ckpt" : o.ckpt;
  save_checkpoint(ckpt, params);
  std::cout << "final recon mse " << result.final_recon << "\n"
            << "wrote " << ckpt << "\n";
  return 0;
}

int cmd_train_lm(const CommonOpts& o) {
  const RunConfig cfg = resolve_config(o);
  ensure_out(o.out);
  Corpus c = corpus_for(cfg, o);
  Rng init(cfg.seed);
  GmmLm model(cfg.lm, init);
  auto result = train_lm(model, c, cfg, o.out + "/lm_metrics.csv", &std::cout);
  auto params = model.parameters();
  const std::string ckpt = o.ckpt.empty() ? o.out + "/lm.ckpt" : o.ckpt;
  save_checkpoint(ckpt, params);
  std::cout << "final align acc " << result.final_metrics.align_acc << "\n"
            << "wrote " << ckpt << "\n";
  return 0;
}

GmmLm lm_from(const RunConfig& cfg, const CommonOpts& o) {
  Rng init(cfg.seed);
  GmmLm model(cfg.lm, init);
  if (!o.ckpt.empty()) {
    auto params = model.parameters();
    load_checkpoint(o.ckpt, params);
  }
  return model;
}

int cmd_synth(const CommonOpts& o, const std::vector<std::size_t>& tokens) {
  const RunConfig cfg = resolve_config(o);
  ensure_out(o.out);
  GmmLm model = lm_from(cfg, o);
  std::vector<std::size_t> toks = tokens;
  if (toks.empty()) {
    Corpus c = corpus_for(cfg, o);
    toks = c.episodes.front().tokens;
  }
  Rng rng = Rng(cfg.seed).substream(0x51);
  auto r = model.generate(toks, {}, o.temperature, rng,
                          /*greedy_align=*/o.temperature == 0.0);
  std::vector<double> flat;
  for (const auto& f : r.frames) flat.insert(flat.end(), f.begin(), f.end());
  const std::string path = o.out + "/synth.bin";
  write_container(path, {{"frames",
                          {r.frames.size(), cfg.lm.dim},
                          std::move(flat)}});
  std::cout << "generated " << r.frames.size() << " frames ("
            << (r.stop_step ? "stopped" : "hit max-len") << "), wrote " << path
            << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& o) {
  const RunConfig cfg = resolve_config(o);
  Corpus c = corpus_for(cfg, o);
  GmmLm model = lm_from(cfg, o);
  EvalOptions eo;
  eo.temperature = o.temperature;
  EvalMetrics m = evaluate_lm(model, c.episodes,
                              Rng(cfg.seed).substream(0xE7A1), eo);
  std::cout << "nll " << m.nll << "\nstop_loss " << m.stop_loss
            << "\nalign_acc " << m.align_acc << "\nlength_err " << m.length_err
            << "\ndiversity " << m.diversity << "\n";
  return 0;
}

int cmd_align_dump(const CommonOpts& o, std::size_t episode, bool hard) {
  const RunConfig cfg = resolve_config(o);
  ensure_out(o.out);
  Corpus c = corpus_for(cfg, o);
  if (episode >= c.episodes.size()) {
    throw ContractError("align-dump: episode index out of range");
  }
  const Episode& ep = c.episodes[episode];
  GmmLm model = lm_from(cfg, o);

  Tensor Y = model.encode_text(ep.tokens);
  Tensor e = energies(ep.frames, Y);
  const std::size_t I = ep.frames.shape()[0], J = ep.tokens.size();
  std::vector<std::vector<double>> alpha(I, std::vector<double>(J, 0.0));
  if (hard) {
    std::vector<std::vector<double>> p(I, std::vector<double>(J));
    for (std::size_t i = 0; i < I; ++i) {
      for (std::size_t j = 0; j < J; ++j) {
        p[i][j] = 1.0 / (1.0 + std::exp(-e.values()[i * J + j]));
      }
    }
    Rng rng = Rng(cfg.seed).substream(0xA1);
    const auto trace = sample_hard_trace(p, rng, /*greedy=*/false);
    for (std::size_t i = 0; i < I; ++i) alpha[i][trace[i]] = 1.0;
  } else {
    Tensor A = soft_expected_alignment(sigmoid(e));
    for (std::size_t i = 0; i < I; ++i) {
      for (std::size_t j = 0; j < J; ++j) alpha[i][j] = A.values()[i * J + j];
    }
  }
  write_alignment_csv(o.out + "/align.csv", alpha);
  write_alignment_pgm(o.out + "/align.pgm", alpha);
  std::cout << "wrote " << o.out << "/align.csv and " << o.out
            << "/align.pgm\n";
  return 0;
}

// Direct-sum mixture density oracle used by self-test only.
double oracle_log_density(const std::vector<double>& x,
                          const std::vector<double>& w,
                          const std::vector<std::vector<double>>& mu,
                          const std::vector<std::vector<double>>& sigma) {
  const std::size_t D = x.size();
  double acc = 0.0;
  for (std::size_t l = 0; l < w.size(); ++l) {
    double q = 0.0, logdet = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      const double z = (x[d] - mu[l][d]) / sigma[l][d];
      q += z * z;
      logdet += std::log(sigma[l][d]);
    }
    acc += w[l] * std::exp(-0.5 * q - logdet -
                           0.5 * D * std::log(2.0 * M_PI));
  }
  return std::log(acc);
}

int cmd_self_test(const CommonOpts& o) {
  const RunConfig cfg = resolve_config(o);
  Rng rng(cfg.seed + 17);
  // 1. soft recursion vs brute-force enumeration
  for (int t = 0; t < 200; ++t) {
    const std::size_t I = 1 + rng.next_u64() % 4, J = 1 + rng.next_u64() % 4;
    std::vector<std::vector<double>> p(I, std::vector<double>(J));
    std::vector<double> flat;
    for (auto& row : p) {
      for (auto& v : row) {
        v = rng.uniform01();
        flat.push_back(v);
      }
    }
    Tensor A = soft_expected_alignment(Tensor::constant({I, J}, flat));
    const auto B = brute_force_expected_alignment(p);
    for (std::size_t i = 0; i < I; ++i) {
      for (std::size_t j = 0; j < J; ++j) {
        if (std::abs(A.values()[i * J + j] - B[i][j]) > 1e-12) {
          std::cout << "self-test FAILED: alignment oracle mismatch\n";
          return 1;
        }
      }
    }
  }
  // 2. mixture density vs direct-sum oracle
  for (int t = 0; t < 100; ++t) {
    const std::size_t L = 1 + rng.next_u64() % 4, D = 1 + rng.next_u64() % 4;
    std::vector<double> w(L), x(D), means, scales;
    std::vector<std::vector<double>> mu(L, std::vector<double>(D));
    std::vector<std::vector<double>> sig(L, std::vector<double>(D));
    double wsum = 0.0;
    for (auto& v : w) {
      v = 0.1 + rng.uniform01();
      wsum += v;
    }
    for (auto& v : w) v /= wsum;
    for (auto& v : x) v = rng.standard_normal();
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t d = 0; d < D; ++d) {
        mu[l][d] = rng.standard_normal();
        sig[l][d] = 0.3 + rng.uniform01();
        means.push_back(mu[l][d]);
        scales.push_back(sig[l][d]);
      }
    }
    GmmParams gp;
    gp.weights = Tensor::constant({L}, w);
    gp.means = Tensor::constant({L, D}, means);
    gp.scales = Tensor::constant({L, D}, scales);
    const double got = gmm_log_density(Tensor::constant({D}, x), gp).item();
    const double want = oracle_log_density(x, w, mu, sig);
    if (std::abs(got - want) / std::max(1.0, std::abs(want)) > 1e-10) {
      std::cout << "self-test FAILED: mixture density mismatch\n";
      return 1;
    }
  }
  // 3. gradient check through the density
  {
    Tensor x = Tensor::param({3}, {0.3, -0.2, 0.5});
    GmmParams gp;
    gp.weights = Tensor::constant({2}, {0.4, 0.6});
    gp.means = Tensor::constant({2, 3}, {0.1, 0.2, -0.1, -0.4, 0.3, 0.6});
    gp.scales = Tensor::constant({2, 3}, {0.8, 1.1, 0.9, 1.2, 0.7, 1.0});
    const double err = grad_check(
        [&](const Tensor& t) { return neg(gmm_log_density(t, gp)); }, x);
    if (err > 1e-6) {
      std::cout << "self-test FAILED: density gradient check\n";
      return 1;
    }
  }
  std::cout << "self-test passed\n";
  return 0;
}

int cmd_sweep(const CommonOpts& o, std::vector<double> lambdas,
              std::vector<std::size_t> mixtures) {
  RunConfig cfg = resolve_config(o);
  ensure_out(o.out);
  if (lambdas.empty()) lambdas = {0.1, 1.0, 10.0, 50.0};
  if (mixtures.empty()) mixtures = {1, 3, 6};
  Corpus c = corpus_for(cfg, o);

  std::ofstream out(o.out + "/sweep.csv", std::ios::trunc);
  if (!out) throw IoError("sweep: cannot open " + o.out + "/sweep.csv");
  out << "lambda";
  for (auto m : mixtures) out << ",L" << m;
  out << "\n";
  for (double lam : lambdas) {
    out << lam;
    for (auto m : mixtures) {
      RunConfig cell = cfg;
      cell.vae.lambda = lam;
      cell.vae.prior.lambda = lam;
      cell.vae.prior.mixtures = m;
      Rng init(cell.seed);
      GmmVae model(cell.vae, init);
      auto r = train_vae(model, c, cell, "");
      out << "," << r.final_recon;
      std::cout << "lambda " << lam << " mixtures " << m << " recon "
                << r.final_recon << "\n";
    }
    out << "\n";
  }
  std::cout << "wrote " << o.out << "/sweep.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gmlab: mixture-prior codec and alignment laboratory"};
  app.require_subcommand(1);

  CommonOpts o;
  std::vector<std::size_t> synth_tokens;
  std::size_t dump_episode = 0;
  bool dump_hard = false;
  std::vector<double> sweep_lambdas;
  std::vector<std::size_t> sweep_mixtures;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  auto* tv = app.add_subcommand("train-vae", "train the codec VAE");
  auto* tl = app.add_subcommand("train-lm", "train the acoustic LM");
  auto* sy = app.add_subcommand("synth", "generate frames from tokens");
  auto* ev = app.add_subcommand("eval", "evaluate a model on the corpus");
  auto* ad = app.add_subcommand("align-dump", "dump an alignment matrix");
  auto* st = app.add_subcommand("self-test", "run oracle and gradient checks");
  auto* sw = app.add_subcommand("sweep", "lambda x mixtures grid");

  for (auto* cmd : {gen, tv, tl, sy, ev, ad, st, sw}) add_common(cmd, o);
  sy->add_option("--tokens", synth_tokens, "token id list")->delimiter(',');
  ad->add_option("--episode", dump_episode, "corpus episode index");
  ad->add_flag("--hard", dump_hard, "dump a sampled hard alignment");
  sw->add_option("--lambda-grid", sweep_lambdas, "lambda values")
      ->delimiter(',');
  sw->add_option("--mixtures-grid", sweep_mixtures, "mixture counts")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o);
    if (tv->parsed()) return cmd_train_vae(o);
    if (tl->parsed()) return cmd_train_lm(o);
    if (sy->parsed()) return cmd_synth(o, synth_tokens);
    if (ev->parsed()) return cmd_eval(o);
    if (ad->parsed()) return cmd_align_dump(o, dump_episode, dump_hard);
    if (st->parsed()) return cmd_self_test(o);
    if (sw->parsed()) return cmd_sweep(o, sweep_lambdas, sweep_mixtures);
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
