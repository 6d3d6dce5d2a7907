#pragma once

#include <cstdint>
#include <string>

#include "gmlab/align.hpp"
#include "gmlab/lm.hpp"
#include "gmlab/optim.hpp"
#include "gmlab/vae.hpp"

namespace gmlab {

/// Corpus generation knobs.  Frames of one token repeat that token's
/// template vector (plus observation noise) for a sampled duration.
struct SyntheticSpec {
  std::size_t vocab = 20;        // V
  std::size_t feat_dim = 16;     // F
  std::size_t min_tokens = 3;
  std::size_t max_tokens = 8;
  std::size_t d_min = 1;
  std::size_t d_max = 3;
  double sigma_obs = 0.05;
  std::size_t size = 200;
  std::uint64_t seed = 1;
};

/// Everything a run needs, persisted as a flat key=value text file.
struct RunConfig {
  SyntheticSpec corpus;
  VaeConfig vae;
  LmConfig lm;
  AdamConfig opt;
  std::uint64_t seed = 1;
  std::size_t steps = 2000;
  std::size_t batch = 4;
  std::size_t eval_interval = 100;
  std::size_t eval_episodes = 32;
};

/// key=value per line; '#' starts a comment; unknown keys rejected with
/// ContractError.  serialize emits every key so parse(serialize(c)) == c.
RunConfig parse_config(const std::string& text);
std::string serialize_config(const RunConfig& c);

RunConfig load_config(const std::string& path);  // IoError on missing file
void save_config(const std::string& path, const RunConfig& c);

}  // namespace gmlab
