#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gmlab/checkpoint.hpp"
#include "gmlab/config.hpp"
#include "gmlab/corpus.hpp"

using namespace gmlab;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("container save -> load -> save is byte-identical") {
  TempFile f1("t_container_a.bin"), f2("t_container_b.bin");
  std::vector<Blob> blobs = {
      {"alpha", {2, 3}, {1.0, -2.5, 3.25, 0.0, 1e-300, -0.0}},
      {"beta", {4}, {7.0, 8.0, 9.0, 10.0}},
  };
  write_container(f1.path, blobs);
  const auto loaded = read_container(f1.path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].name == "alpha");
  CHECK(loaded[0].shape == Shape{2, 3});
  CHECK(loaded[0].data == blobs[0].data);
  CHECK(loaded[1].data == blobs[1].data);
  write_container(f2.path, loaded);
  CHECK(slurp(f1.path) == slurp(f2.path));
}

TEST_CASE("container rejects bad magic and truncation") {
  TempFile f("t_container_bad.bin");
  {
    std::ofstream out(f.path, std::ios::binary);
    out << "NOTMAGIC\nalpha 2 0\nend\n";
  }
  CHECK_THROWS_AS(read_container(f.path), IoError);
  {
    std::ofstream out(f.path, std::ios::binary);
    out << "GMLAB001\nalpha 4 0\nend\n";  // promises 4 values, delivers 0
  }
  CHECK_THROWS_AS(read_container(f.path), IoError);
  CHECK_THROWS_AS(read_container("no_such_file.bin"), IoError);
}

TEST_CASE("container rejects mismatched shape and size") {
  CHECK_THROWS_AS(write_container("t_unused.bin", {{"x", {3}, {1.0, 2.0}}}),
                  ContractError);
}

TEST_CASE("checkpoint round trip restores parameters exactly") {
  TempFile f("t_ckpt.bin");
  Rng rng(3);
  NamedParams params = {
      {"layer.w", Tensor::param({2, 2}, {0.1, 0.2, 0.3, 0.4})},
      {"layer.b", Tensor::param({2}, {-1.0, 1.0})},
  };
  save_checkpoint(f.path, params);

  NamedParams fresh = {
      {"layer.w", Tensor::param({2, 2}, {0, 0, 0, 0})},
      {"layer.b", Tensor::param({2}, {0, 0})},
  };
  load_checkpoint(f.path, fresh);
  CHECK(fresh[0].second.values() == params[0].second.values());
  CHECK(fresh[1].second.values() == params[1].second.values());

  NamedParams wrong = {{"other", Tensor::param({2}, {0, 0})}};
  CHECK_THROWS_AS(load_checkpoint(f.path, wrong), ContractError);
}

TEST_CASE("config serialize/parse is the identity") {
  RunConfig c;
  c.seed = 1234567890123ULL;
  c.steps = 777;
  c.vae.lambda = 0.30000000000000004;
  c.lm.align = AlignMode::noise;
  c.lm.cov_type = CovType::full;
  c.corpus.sigma_obs = 1e-3;
  const std::string text = serialize_config(c);
  RunConfig back = parse_config(text);
  CHECK(serialize_config(back) == text);
  CHECK(back.seed == c.seed);
  CHECK(back.steps == c.steps);
  CHECK(back.vae.lambda == c.vae.lambda);
  CHECK(back.lm.align == AlignMode::noise);
  CHECK(back.lm.cov_type == CovType::full);
  CHECK(back.corpus.sigma_obs == c.corpus.sigma_obs);
}

TEST_CASE("config rejects unknown keys and malformed lines") {
  CHECK_THROWS_AS(parse_config("no_such_key=1\n"), ContractError);
  CHECK_THROWS_AS(parse_config("run.steps\n"), ContractError);
  CHECK_THROWS_AS(parse_config("run.steps=abc\n"), ContractError);
  CHECK_THROWS_AS(parse_config("lm.align_mode=sideways\n"), ContractError);
  RunConfig c = parse_config("# comment only\n\nrun.steps = 5 # inline\n");
  CHECK(c.steps == 5);
}

TEST_CASE("synthetic corpora are deterministic and faithful to templates") {
  SyntheticSpec spec;
  spec.vocab = 4;
  spec.feat_dim = 3;
  spec.min_tokens = 2;
  spec.max_tokens = 4;
  spec.d_min = 1;
  spec.d_max = 1;
  spec.sigma_obs = 0.0;
  spec.size = 10;
  spec.seed = 7;

  Corpus a = gen_corpus(spec);
  Corpus b = gen_corpus(spec);
  REQUIRE(a.episodes.size() == 10);
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(a.episodes[k].tokens == b.episodes[k].tokens);
    CHECK(a.episodes[k].frames.values() == b.episodes[k].frames.values());
  }

  // sigma 0 and unit durations: frames are exactly the template sequence
  for (const auto& ep : a.episodes) {
    REQUIRE(ep.frames.shape()[0] == ep.tokens.size());
    for (std::size_t i = 0; i < ep.tokens.size(); ++i) {
      CHECK(ep.gt_alignment[i] == i);
      for (std::size_t d = 0; d < 3; ++d) {
        CHECK(ep.frames.values()[i * 3 + d] ==
              a.templates[ep.tokens[i]][d]);
      }
    }
  }
}

TEST_CASE("ground-truth alignments are monotone with unit steps") {
  SyntheticSpec spec;
  spec.vocab = 6;
  spec.feat_dim = 2;
  spec.d_min = 1;
  spec.d_max = 4;
  spec.size = 25;
  spec.seed = 9;
  Corpus c = gen_corpus(spec);
  for (const auto& ep : c.episodes) {
    CHECK(ep.gt_alignment[0] == 0);
    for (std::size_t i = 1; i < ep.gt_alignment.size(); ++i) {
      CHECK(ep.gt_alignment[i] >= ep.gt_alignment[i - 1]);
      CHECK(ep.gt_alignment[i] - ep.gt_alignment[i - 1] <= 1);
    }
    CHECK(ep.gt_alignment.back() == ep.tokens.size() - 1);
  }
}

TEST_CASE("corpus container round trip is faithful") {
  TempFile f("t_corpus.bin");
  SyntheticSpec spec;
  spec.vocab = 3;
  spec.feat_dim = 2;
  spec.size = 5;
  spec.seed = 0xABCDEF0123456789ULL;
  Corpus a = gen_corpus(spec);
  save_corpus(f.path, a);
  Corpus b = load_corpus(f.path);
  CHECK(b.spec.seed == spec.seed);
  CHECK(b.spec.vocab == 3);
  REQUIRE(b.episodes.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(b.episodes[k].tokens == a.episodes[k].tokens);
    CHECK(b.episodes[k].gt_alignment == a.episodes[k].gt_alignment);
    CHECK(b.episodes[k].frames.values() == a.episodes[k].frames.values());
  }
  CHECK(b.templates == a.templates);
}

TEST_CASE("invalid corpus specs are rejected") {
  SyntheticSpec spec;
  spec.d_min = 0;
  CHECK_THROWS_AS(gen_corpus(spec), ContractError);
  spec.d_min = 3;
  spec.d_max = 2;
  CHECK_THROWS_AS(gen_corpus(spec), ContractError);
}
