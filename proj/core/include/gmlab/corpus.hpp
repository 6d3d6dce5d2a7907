#pragma once

#include <string>
#include <vector>

#include "gmlab/config.hpp"
#include "gmlab/lm.hpp"
#include "gmlab/rng.hpp"

namespace gmlab {

struct Corpus {
  SyntheticSpec spec;
  std::vector<std::vector<double>> templates;  // V rows of F values
  std::vector<Episode> episodes;
};

/// Deterministic synthetic corpus: per-token template vectors drawn once
/// under the corpus seed, episodes drawn from per-(seed,index) substreams.
/// Each frame is its token's template plus N(0, sigma_obs^2) noise;
/// gt_alignment records the token index of every frame.
Corpus gen_corpus(const SyntheticSpec& spec);

/// Stored in the shared container format (templates, then per-episode
/// token/frame/alignment blobs).
void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(const std::string& path);

}  // namespace gmlab
