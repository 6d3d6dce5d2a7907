#include "gmlab/corpus.hpp"

#include <cmath>

#include "gmlab/checkpoint.hpp"
#include "gmlab/error.hpp"

namespace gmlab {

namespace {

void validate_spec(const SyntheticSpec& s) {
  if (s.vocab == 0 || s.feat_dim == 0 || s.size == 0) {
    throw ContractError("gen_corpus: vocab, feat_dim and size must be > 0");
  }
  if (s.min_tokens == 0 || s.max_tokens < s.min_tokens) {
    throw ContractError("gen_corpus: bad token-count range");
  }
  if (s.d_min < 1 || s.d_max < s.d_min) {
    throw ContractError("gen_corpus: bad duration range (d_min >= 1)");
  }
  if (s.sigma_obs < 0.0) throw ContractError("gen_corpus: sigma_obs < 0");
}

std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.next_u64() % (hi - lo + 1));
}

}  // namespace

Corpus gen_corpus(const SyntheticSpec& spec) {
  validate_spec(spec);
  Corpus c;
  c.spec = spec;

  Rng trng = Rng(spec.seed).substream(0);
  c.templates.assign(spec.vocab, std::vector<double>(spec.feat_dim));
  for (auto& row : c.templates) {
    for (auto& v : row) v = trng.standard_normal();
  }

  c.episodes.reserve(spec.size);
  const Rng base(spec.seed);
  for (std::size_t k = 0; k < spec.size; ++k) {
    Rng er = base.substream(k + 1);
    Episode ep;
    const std::size_t n = uniform_int(er, spec.min_tokens, spec.max_tokens);
    ep.tokens.resize(n);
    for (auto& t : ep.tokens) t = uniform_int(er, 0, spec.vocab - 1);

    std::vector<double> frames;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t dur = uniform_int(er, spec.d_min, spec.d_max);
      for (std::size_t d = 0; d < dur; ++d) {
        for (double tv : c.templates[ep.tokens[j]]) {
          frames.push_back(tv + spec.sigma_obs * er.standard_normal());
        }
        ep.gt_alignment.push_back(j);
      }
    }
    const std::size_t I = ep.gt_alignment.size();
    ep.frames = Tensor::constant({I, spec.feat_dim}, std::move(frames));
    c.episodes.push_back(std::move(ep));
  }
  return c;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  const SyntheticSpec& s = corpus.spec;
  std::vector<Blob> blobs;
  blobs.push_back({"meta",
                   {10},
                   {static_cast<double>(s.vocab), static_cast<double>(s.feat_dim),
                    static_cast<double>(s.min_tokens),
                    static_cast<double>(s.max_tokens),
                    static_cast<double>(s.d_min), static_cast<double>(s.d_max),
                    s.sigma_obs, static_cast<double>(s.size),
                    static_cast<double>(s.seed >> 32),
                    static_cast<double>(s.seed & 0xffffffffULL)}});
  std::vector<double> tmpl;
  for (const auto& row : corpus.templates) {
    tmpl.insert(tmpl.end(), row.begin(), row.end());
  }
  blobs.push_back({"templates", {s.vocab, s.feat_dim}, std::move(tmpl)});
  for (std::size_t k = 0; k < corpus.episodes.size(); ++k) {
    const Episode& ep = corpus.episodes[k];
    const std::string pre = "ep" + std::to_string(k) + ".";
    std::vector<double> toks(ep.tokens.begin(), ep.tokens.end());
    std::vector<double> gta(ep.gt_alignment.begin(), ep.gt_alignment.end());
    blobs.push_back({pre + "tokens", {ep.tokens.size()}, std::move(toks)});
    blobs.push_back({pre + "frames", ep.frames.shape(), ep.frames.values()});
    blobs.push_back({pre + "align", {ep.gt_alignment.size()}, std::move(gta)});
  }
  write_container(path, blobs);
}

Corpus load_corpus(const std::string& path) {
  const std::vector<Blob> blobs = read_container(path);
  if (blobs.size() < 2 || blobs[0].name != "meta" || blobs[0].data.size() != 10) {
    throw IoError("load_corpus: not a corpus file: " + path);
  }
  Corpus c;
  const auto& m = blobs[0].data;
  c.spec.vocab = static_cast<std::size_t>(m[0]);
  c.spec.feat_dim = static_cast<std::size_t>(m[1]);
  c.spec.min_tokens = static_cast<std::size_t>(m[2]);
  c.spec.max_tokens = static_cast<std::size_t>(m[3]);
  c.spec.d_min = static_cast<std::size_t>(m[4]);
  c.spec.d_max = static_cast<std::size_t>(m[5]);
  c.spec.sigma_obs = m[6];
  c.spec.size = static_cast<std::size_t>(m[7]);
  c.spec.seed = (static_cast<std::uint64_t>(m[8]) << 32) |
                static_cast<std::uint64_t>(m[9]);

  if (blobs[1].name != "templates") {
    throw IoError("load_corpus: missing templates blob");
  }
  c.templates.assign(c.spec.vocab, std::vector<double>(c.spec.feat_dim));
  for (std::size_t v = 0; v < c.spec.vocab; ++v) {
    for (std::size_t f = 0; f < c.spec.feat_dim; ++f) {
      c.templates[v][f] = blobs[1].data[v * c.spec.feat_dim + f];
    }
  }

  if ((blobs.size() - 2) % 3 != 0) {
    throw IoError("load_corpus: malformed episode blobs");
  }
  const std::size_t count = (blobs.size() - 2) / 3;
  for (std::size_t k = 0; k < count; ++k) {
    const Blob& bt = blobs[2 + 3 * k];
    const Blob& bf = blobs[2 + 3 * k + 1];
    const Blob& ba = blobs[2 + 3 * k + 2];
    const std::string pre = "ep" + std::to_string(k) + ".";
    if (bt.name != pre + "tokens" || bf.name != pre + "frames" ||
        ba.name != pre + "align") {
      throw IoError("load_corpus: unexpected blob order");
    }
    Episode ep;
    for (double t : bt.data) ep.tokens.push_back(static_cast<std::size_t>(t));
    for (double a : ba.data) {
      ep.gt_alignment.push_back(static_cast<std::size_t>(a));
    }
    ep.frames = Tensor::constant(bf.shape, bf.data);
    c.episodes.push_back(std::move(ep));
  }
  return c;
}

}  // namespace gmlab
