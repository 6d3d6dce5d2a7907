#include "gmlab/lm.hpp"

#include <cmath>

namespace gmlab {

namespace {

Tensor init_weight(std::size_t in, std::size_t out, Rng& rng) {
  std::vector<double> w(in * out);
  const double s = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& x : w) x = s * rng.standard_normal();
  return Tensor::param({in, out}, std::move(w));
}

Tensor init_bias(std::size_t out) {
  return Tensor::param({out}, std::vector<double>(out, 0.0));
}

Tensor positional_encoding(std::size_t t, std::size_t d) {
  std::vector<double> pe(t * d);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(k - (k % 2)) /
                                static_cast<double>(d));
      const double arg = static_cast<double>(i) * freq;
      pe[i * d + k] = (k % 2 == 0) ? std::sin(arg) : std::cos(arg);
    }
  }
  return Tensor::constant({t, d}, std::move(pe));
}

Tensor layer_norm(const Tensor& x, const Tensor& g, const Tensor& b) {
  const std::size_t D = x.shape()[1];
  Tensor m = reshape(mul_scalar(sum_last(x), 1.0 / D), {x.shape()[0], 1});
  Tensor centered = sub(x, m);
  Tensor var = reshape(mul_scalar(sum_last(mul(centered, centered)), 1.0 / D),
                       {x.shape()[0], 1});
  Tensor norm = divide(centered, sqrt(add_scalar(var, 1e-6)));
  return add(mul(norm, g), b);
}

Tensor causal_mask(std::size_t t) {
  std::vector<double> m(t * t, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = i + 1; j < t; ++j) m[i * t + j] = -1e9;
  }
  return Tensor::constant({t, t}, std::move(m));
}

}  // namespace

GmmLm::Block GmmLm::make_block(Rng& rng) const {
  const std::size_t D = cfg_.dim;
  Block b;
  b.wq = init_weight(D, D, rng);
  b.wk = init_weight(D, D, rng);
  b.wv = init_weight(D, D, rng);
  b.wo = init_weight(D, D, rng);
  b.ln1_g = Tensor::param({D}, std::vector<double>(D, 1.0));
  b.ln1_b = init_bias(D);
  b.ln2_g = Tensor::param({D}, std::vector<double>(D, 1.0));
  b.ln2_b = init_bias(D);
  b.ff_w1 = init_weight(D, cfg_.ff, rng);
  b.ff_b1 = init_bias(cfg_.ff);
  b.ff_w2 = init_weight(cfg_.ff, D, rng);
  b.ff_b2 = init_bias(D);
  return b;
}

GmmLm::GmmLm(const LmConfig& cfg, Rng& init_rng) : cfg_(cfg) {
  if (cfg.dim == 0 || cfg.vocab == 0 || cfg.mixtures == 0) {
    throw ContractError("GmmLm: invalid config");
  }
  if (cfg.dim % cfg.heads != 0) {
    throw ContractError("GmmLm: dim must be divisible by heads");
  }
  embedding_ = init_weight(cfg.vocab, cfg.dim, init_rng);
  for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
    enc_.push_back(make_block(init_rng));
  }
  for (std::size_t l = 0; l < cfg.dec_layers; ++l) {
    dec_.push_back(make_block(init_rng));
  }
  MdnConfig mc{cfg.mixtures, cfg.dim, cfg.cov_type, cfg.regression};
  head_w_ = init_weight(cfg.dim, mdn_raw_size(mc), init_rng);
  head_b_ = init_bias(mdn_raw_size(mc));
  stop_w_ = init_weight(cfg.dim, 1, init_rng);
  stop_b_ = init_bias(1);
}

Tensor GmmLm::run_block(const Tensor& x, const Block& b, bool causal) const {
  const std::size_t T = x.shape()[0], D = cfg_.dim;
  const std::size_t H = cfg_.heads, dh = D / H;
  Tensor a = layer_norm(x, b.ln1_g, b.ln1_b);
  Tensor q = matmul(a, b.wq), k = matmul(a, b.wk), v = matmul(a, b.wv);
  Tensor mask;
  if (causal) mask = causal_mask(T);
  std::vector<Tensor> heads;
  heads.reserve(H);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t h = 0; h < H; ++h) {
    Tensor qh = slice(q, 1, h * dh, dh);
    Tensor kh = slice(k, 1, h * dh, dh);
    Tensor vh = slice(v, 1, h * dh, dh);
    Tensor scores = mul_scalar(matmul(qh, transpose(kh)), inv_sqrt);
    if (causal) scores = add(scores, mask);
    heads.push_back(matmul(softmax_last(scores), vh));
  }
  Tensor attn = matmul(H == 1 ? heads[0] : concat(heads, 1), b.wo);
  Tensor x1 = add(x, attn);
  Tensor f = layer_norm(x1, b.ln2_g, b.ln2_b);
  Tensor ff = add(matmul(tanh(add(matmul(f, b.ff_w1), b.ff_b1)), b.ff_w2),
                  b.ff_b2);
  return add(x1, ff);
}

Tensor GmmLm::encode_text(const std::vector<std::size_t>& tokens) const {
  if (tokens.empty()) throw ContractError("encode_text: empty token sequence");
  for (auto t : tokens) {
    if (t >= cfg_.vocab) throw ContractError("encode_text: token out of vocab");
  }
  Tensor y = add(rows(embedding_, tokens),
                 positional_encoding(tokens.size(), cfg_.dim));
  for (const auto& b : enc_) y = run_block(y, b, /*causal=*/false);
  return y;
}

Tensor GmmLm::decoder_states(const Tensor& contexts) const {
  Tensor x = add(contexts, positional_encoding(contexts.shape()[0], cfg_.dim));
  for (const auto& b : dec_) x = run_block(x, b, /*causal=*/true);
  return x;
}

Tensor GmmLm::head_raw(const Tensor& states) const {
  return add(matmul(states, head_w_), head_b_);
}

Tensor GmmLm::stop_logits(const Tensor& states) const {
  return reshape(add(matmul(states, stop_w_), stop_b_), {states.shape()[0]});
}

GmmLm::TfResult GmmLm::teacher_forced_loss(
    const Episode& ep, Rng& rng, double s,
    std::optional<std::size_t> effective_len, bool greedy_align) const {
  const std::size_t I_full = ep.frames.shape()[0];
  const std::size_t I = effective_len.value_or(I_full);
  if (I < 2 || I > I_full) {
    throw ContractError("teacher_forced_loss: need 2 <= I <= frame count");
  }
  if (ep.frames.shape()[1] != cfg_.dim) {
    throw ContractError("teacher_forced_loss: frame dim != model dim");
  }
  Tensor Y = encode_text(ep.tokens);
  const std::size_t J = ep.tokens.size();
  Tensor H = (I == I_full) ? ep.frames : slice(ep.frames, 0, 0, I);
  Tensor e = energies(H, Y);  // {I,J}

  // Frame k's alignment alpha_k: alpha_0 is pinned one-hot at position 0
  // and the transition into frame k uses row k of u (Eq. 9 convention,
  // matching soft_expected_alignment / sample_hard_trace).  Context row k
  // is Y^T alpha_k + h_k and predicts frame k+1.
  std::vector<std::size_t> trace;
  trace.reserve(I);
  trace.push_back(0);
  std::vector<Tensor> context_rows;
  context_rows.reserve(I - 1);

  auto push_context = [&](const Tensor& alpha_row, std::size_t frame_idx) {
    Tensor h_i = reshape(slice(H, 0, frame_idx, 1), {cfg_.dim});
    context_rows.push_back(reshape(context(Y, alpha_row, h_i), {1, cfg_.dim}));
  };
  auto argmax_row = [J](const std::vector<double>& av, std::size_t row) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < J; ++j) {
      if (av[row * J + j] > av[row * J + arg]) arg = j;
    }
    return arg;
  };

  if (cfg_.align == AlignMode::soft || cfg_.align == AlignMode::cross) {
    Tensor A = cfg_.align == AlignMode::soft
                   ? soft_expected_alignment(sigmoid(e))
                   : softmax_last(e);
    for (std::size_t k = 0; k + 1 < I; ++k) {
      push_context(reshape(slice(A, 0, k, 1), {J}), k);
    }
    for (std::size_t k = 1; k < I; ++k) {
      trace.push_back(argmax_row(A.values(), k));
    }
  } else {
    Tensor u;
    if (greedy_align) {
      std::vector<double> hard(e.size());
      for (std::size_t k = 0; k < e.size(); ++k) {
        hard[k] = e.values()[k] >= 0.0 ? 1.0 : 0.0;
      }
      u = Tensor::constant(e.shape(), std::move(hard));
    } else {
      u = sample_alignment(e, s, rng, cfg_.align).u;
    }
    Tensor alpha = Tensor::one_hot(J, 0);
    for (std::size_t k = 0; k + 1 < I; ++k) {
      push_context(alpha, k);
      Tensor u_row = reshape(slice(u, 0, k + 1, 1), {J});
      alpha = align_update(alpha, u_row);
      trace.push_back(argmax_row(alpha.values(), 0));
    }
  }

  Tensor C = context_rows.size() == 1 ? context_rows[0]
                                      : concat(context_rows, 0);  // {I-1,D}
  Tensor states = decoder_states(C);
  Tensor raw = head_raw(states);

  MdnConfig mc{cfg_.mixtures, cfg_.dim, cfg_.cov_type, cfg_.regression};
  std::vector<Tensor> nlls;
  nlls.reserve(I - 1);
  for (std::size_t k = 0; k + 1 < I; ++k) {
    MdnOutput out =
        mdn_parameterize(reshape(slice(raw, 0, k, 1), {mdn_raw_size(mc)}), mc);
    Tensor target = reshape(slice(H, 0, k + 1, 1), {cfg_.dim});
    nlls.push_back(mdn_loss(target, out));
  }
  Tensor nll = mul_scalar(sum(concat(nlls, 0)), 1.0 / (I - 1));

  std::vector<double> is_last(I - 1, 0.0);
  is_last[I - 2] = 1.0;
  Tensor stop = stop_loss(stop_logits(states), is_last, cfg_.stop_pos_weight);

  TfResult res;
  res.nll = nll;
  res.stop = stop;
  res.total = add(nll, stop);
  res.alignment_trace = std::move(trace);
  return res;
}

GmmLm::GenResult GmmLm::generate(
    const std::vector<std::size_t>& tokens,
    const std::vector<std::vector<double>>& prompt_frames, double temperature,
    Rng& rng, bool greedy_align) const {
  Tensor Y = encode_text(tokens);
  const std::size_t J = tokens.size(), D = cfg_.dim;
  const auto& yv = Y.values();

  GenResult res;
  res.prompt_len = prompt_frames.size();
  if (prompt_frames.empty()) {
    res.frames.push_back(std::vector<double>(D, 0.0));
  } else {
    for (const auto& f : prompt_frames) {
      if (f.size() != D) throw ContractError("generate: prompt dim mismatch");
      res.frames.push_back(f);
    }
  }
  std::size_t pos = 0;
  std::vector<double> contexts;  // flattened {T,D}
  MdnConfig mc{cfg_.mixtures, cfg_.dim, cfg_.cov_type, cfg_.regression};

  while (res.frames.size() < cfg_.max_len) {
    const std::vector<double>& h = res.frames.back();
    // frame 0 is pinned at position 0; every later frame decides
    // stay/advance from its own energy at the current position
    if (!res.alignment_trace.empty() && pos + 1 < J) {
      double e_pos = 0.0;
      for (std::size_t d = 0; d < D; ++d) e_pos += h[d] * yv[pos * D + d];
      const double p = 1.0 / (1.0 + std::exp(-e_pos));
      const bool stay = greedy_align ? p >= 0.5 : rng.bernoulli(p) == 1.0;
      if (!stay) ++pos;
    }
    res.alignment_trace.push_back(pos);
    std::vector<double> c(D);
    for (std::size_t d = 0; d < D; ++d) c[d] = yv[pos * D + d] + h[d];
    contexts.insert(contexts.end(), c.begin(), c.end());

    const std::size_t T = contexts.size() / D;
    Tensor C = Tensor::constant({T, D}, contexts);
    Tensor states = decoder_states(C);
    Tensor raw_last =
        reshape(slice(head_raw(states), 0, T - 1, 1), {mdn_raw_size(mc)});
    MdnOutput out = mdn_parameterize(raw_last, mc);

    const bool teacher = res.frames.size() < res.prompt_len;
    if (teacher) {
      res.frames.push_back(prompt_frames[res.frames.size()]);
      continue;
    }
    res.frames.push_back(mdn_sample_frame(out, temperature, rng));

    const double stop_logit =
        stop_logits(states).values()[T - 1];
    if (stop_logit > 0.0) {  // sigmoid > 0.5
      res.stop_step = res.frames.size() - 1;
      break;
    }
  }
  return res;
}

NamedParams GmmLm::parameters() {
  NamedParams p;
  p.emplace_back("embedding", embedding_);
  auto add_block = [&p](const std::string& prefix, Block& b) {
    p.emplace_back(prefix + ".wq", b.wq);
    p.emplace_back(prefix + ".wk", b.wk);
    p.emplace_back(prefix + ".wv", b.wv);
    p.emplace_back(prefix + ".wo", b.wo);
    p.emplace_back(prefix + ".ln1_g", b.ln1_g);
    p.emplace_back(prefix + ".ln1_b", b.ln1_b);
    p.emplace_back(prefix + ".ln2_g", b.ln2_g);
    p.emplace_back(prefix + ".ln2_b", b.ln2_b);
    p.emplace_back(prefix + ".ff_w1", b.ff_w1);
    p.emplace_back(prefix + ".ff_b1", b.ff_b1);
    p.emplace_back(prefix + ".ff_w2", b.ff_w2);
    p.emplace_back(prefix + ".ff_b2", b.ff_b2);
  };
  for (std::size_t l = 0; l < enc_.size(); ++l) {
    add_block("enc." + std::to_string(l), enc_[l]);
  }
  for (std::size_t l = 0; l < dec_.size(); ++l) {
    add_block("dec." + std::to_string(l), dec_[l]);
  }
  p.emplace_back("head.w", head_w_);
  p.emplace_back("head.b", head_b_);
  p.emplace_back("stop.w", stop_w_);
  p.emplace_back("stop.b", stop_b_);
  return p;
}

TrainMetrics lm_train_step(GmmLm& model, std::span<const Episode> batch,
                           std::span<const std::size_t> episode_ids,
                           Adam& opt, const Rng& base, std::size_t step,
                           std::size_t total_steps) {
  if (batch.empty()) throw ContractError("lm_train_step: empty batch");
  if (batch.size() != episode_ids.size()) {
    throw ContractError("lm_train_step: ids/batch size mismatch");
  }
  TrainMetrics m;
  m.temperature = temperature_schedule(std::min(step, total_steps), total_steps,
                                       model.config().s_hi,
                                       model.config().s_lo);
  try {
    std::vector<Tensor> totals;
    double nll_sum = 0.0, stop_sum = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      Rng ep_rng = base.substream(step).substream(episode_ids[k]);
      auto res = model.teacher_forced_loss(batch[k], ep_rng, m.temperature);
      nll_sum += res.nll.item();
      stop_sum += res.stop.item();
      totals.push_back(res.total);
    }
    Tensor loss = mul_scalar(sum(concat(totals, 0)),
                             1.0 / static_cast<double>(totals.size()));
    m.nll = nll_sum / batch.size();
    m.stop = stop_sum / batch.size();
    backward(loss);
    auto params = model.parameters();
    m.grad_norm = opt.step(params);
  } catch (const NumericError&) {
    m.ok = false;
    auto params = model.parameters();
    for (auto& [name, p] : params) p.zero_grad();
  }
  return m;
}

}  // namespace gmlab
