#include "gmlab/config.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "gmlab/error.hpp"

namespace gmlab {

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::uint64_t x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ContractError("config: bad integer for " + key + ": " + v);
  }
}

double parse_f64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ContractError("config: bad number for " + key + ": " + v);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ContractError("config: bad bool for " + key + ": " + v);
}

CovType parse_cov(const std::string& key, const std::string& v) {
  if (v == "diag") return CovType::diagonal;
  if (v == "full") return CovType::full;
  throw ContractError("config: bad cov type for " + key + ": " + v);
}

// One registry drives both directions so the key set cannot drift.
struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

using FieldMap = std::map<std::string, Field>;

void add(FieldMap& m, const std::string& key,
         std::function<std::string(const RunConfig&)> get,
         std::function<void(RunConfig&, const std::string&)> set) {
  m.emplace(key, Field{std::move(get), std::move(set)});
}

const FieldMap& fields() {
  static const FieldMap m = [] {
    FieldMap f;
    auto uint_field = [&f](const std::string& key, auto member) {
      add(
          f, key,
          [member](const RunConfig& c) { return std::to_string(c.*member); },
          [member, key](RunConfig& c, const std::string& v) {
            c.*member = static_cast<std::size_t>(parse_u64(key, v));
          });
    };
    // Generic accessors for nested members via lambdas.
    auto nested_uint = [&f](const std::string& key, auto getter) {
      add(
          f, key,
          [getter](const RunConfig& c) {
            return std::to_string(getter(const_cast<RunConfig&>(c)));
          },
          [getter, key](RunConfig& c, const std::string& v) {
            getter(c) = static_cast<std::size_t>(parse_u64(key, v));
          });
    };
    auto nested_f64 = [&f](const std::string& key, auto getter) {
      add(
          f, key,
          [getter](const RunConfig& c) {
            return fmt_double(getter(const_cast<RunConfig&>(c)));
          },
          [getter, key](RunConfig& c, const std::string& v) {
            getter(c) = parse_f64(key, v);
          });
    };
    auto nested_bool = [&f](const std::string& key, auto getter) {
      add(
          f, key,
          [getter](const RunConfig& c) {
            return getter(const_cast<RunConfig&>(c)) ? "true" : "false";
          },
          [getter, key](RunConfig& c, const std::string& v) {
            getter(c) = parse_bool(key, v);
          });
    };
    auto nested_cov = [&f](const std::string& key, auto getter) {
      add(
          f, key,
          [getter](const RunConfig& c) {
            return getter(const_cast<RunConfig&>(c)) == CovType::full
                       ? std::string("full")
                       : std::string("diag");
          },
          [getter, key](RunConfig& c, const std::string& v) {
            getter(c) = parse_cov(key, v);
          });
    };

    nested_uint("corpus.vocab", [](RunConfig& c) -> std::size_t& { return c.corpus.vocab; });
    nested_uint("corpus.feat_dim", [](RunConfig& c) -> std::size_t& { return c.corpus.feat_dim; });
    nested_uint("corpus.min_tokens", [](RunConfig& c) -> std::size_t& { return c.corpus.min_tokens; });
    nested_uint("corpus.max_tokens", [](RunConfig& c) -> std::size_t& { return c.corpus.max_tokens; });
    nested_uint("corpus.d_min", [](RunConfig& c) -> std::size_t& { return c.corpus.d_min; });
    nested_uint("corpus.d_max", [](RunConfig& c) -> std::size_t& { return c.corpus.d_max; });
    nested_f64("corpus.sigma_obs", [](RunConfig& c) -> double& { return c.corpus.sigma_obs; });
    nested_uint("corpus.size", [](RunConfig& c) -> std::size_t& { return c.corpus.size; });
    add(
        f, "corpus.seed",
        [](const RunConfig& c) { return std::to_string(c.corpus.seed); },
        [](RunConfig& c, const std::string& v) {
          c.corpus.seed = parse_u64("corpus.seed", v);
        });

    nested_uint("vae.feat_dim", [](RunConfig& c) -> std::size_t& { return c.vae.feat_dim; });
    nested_uint("vae.latent_dim", [](RunConfig& c) -> std::size_t& { return c.vae.latent_dim; });
    nested_uint("vae.stride", [](RunConfig& c) -> std::size_t& { return c.vae.stride; });
    nested_uint("vae.hidden", [](RunConfig& c) -> std::size_t& { return c.vae.hidden; });
    nested_f64("vae.lambda", [](RunConfig& c) -> double& { return c.vae.lambda; });
    nested_uint("vae.prior.mixtures", [](RunConfig& c) -> std::size_t& { return c.vae.prior.mixtures; });
    nested_bool("vae.prior.learn_means_only", [](RunConfig& c) -> bool& { return c.vae.prior.learn_means_only; });
    nested_f64("vae.prior.lambda", [](RunConfig& c) -> double& { return c.vae.prior.lambda; });
    nested_f64("vae.prior.posterior_noise", [](RunConfig& c) -> double& { return c.vae.prior.posterior_noise; });

    nested_uint("lm.vocab", [](RunConfig& c) -> std::size_t& { return c.lm.vocab; });
    nested_uint("lm.dim", [](RunConfig& c) -> std::size_t& { return c.lm.dim; });
    nested_uint("lm.enc_layers", [](RunConfig& c) -> std::size_t& { return c.lm.enc_layers; });
    nested_uint("lm.dec_layers", [](RunConfig& c) -> std::size_t& { return c.lm.dec_layers; });
    nested_uint("lm.heads", [](RunConfig& c) -> std::size_t& { return c.lm.heads; });
    nested_uint("lm.ff", [](RunConfig& c) -> std::size_t& { return c.lm.ff; });
    nested_uint("lm.mixtures", [](RunConfig& c) -> std::size_t& { return c.lm.mixtures; });
    nested_cov("lm.cov", [](RunConfig& c) -> CovType& { return c.lm.cov_type; });
    nested_bool("lm.regression", [](RunConfig& c) -> bool& { return c.lm.regression; });
    add(
        f, "lm.align_mode",
        [](const RunConfig& c) { return align_mode_name(c.lm.align); },
        [](RunConfig& c, const std::string& v) {
          const auto m = parse_align_mode(v);
          if (!m) throw ContractError("config: bad align mode: " + v);
          c.lm.align = *m;
        });
    nested_f64("lm.s_hi", [](RunConfig& c) -> double& { return c.lm.s_hi; });
    nested_f64("lm.s_lo", [](RunConfig& c) -> double& { return c.lm.s_lo; });
    nested_uint("lm.max_len", [](RunConfig& c) -> std::size_t& { return c.lm.max_len; });
    nested_f64("lm.stop_pos_weight", [](RunConfig& c) -> double& { return c.lm.stop_pos_weight; });

    nested_f64("opt.lr", [](RunConfig& c) -> double& { return c.opt.lr; });
    nested_f64("opt.beta1", [](RunConfig& c) -> double& { return c.opt.beta1; });
    nested_f64("opt.beta2", [](RunConfig& c) -> double& { return c.opt.beta2; });
    nested_f64("opt.eps", [](RunConfig& c) -> double& { return c.opt.eps; });
    nested_f64("opt.clip", [](RunConfig& c) -> double& { return c.opt.clip; });

    add(
        f, "run.seed",
        [](const RunConfig& c) { return std::to_string(c.seed); },
        [](RunConfig& c, const std::string& v) {
          c.seed = parse_u64("run.seed", v);
        });
    uint_field("run.steps", &RunConfig::steps);
    uint_field("run.batch", &RunConfig::batch);
    uint_field("run.eval_interval", &RunConfig::eval_interval);
    uint_field("run.eval_episodes", &RunConfig::eval_episodes);
    return f;
  }();
  return m;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ContractError("config: line " + std::to_string(lineno) +
                          " is not key=value");
    }
    auto strip = [](std::string s) {
      const auto x = s.find_first_not_of(" \t");
      if (x == std::string::npos) return std::string();
      const auto y = s.find_last_not_of(" \t");
      return s.substr(x, y - x + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string val = strip(line.substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) {
      throw ContractError("config: unknown key: " + key);
    }
    it->second.set(c, val);
  }
  return c;
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  for (const auto& [key, field] : fields()) {
    os << key << "=" << field.get(c) << "\n";
  }
  return os.str();
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void save_config(const std::string& path, const RunConfig& c) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("save_config: cannot open " + path);
  out << serialize_config(c);
  if (!out) throw IoError("save_config: write failed for " + path);
}

}  // namespace gmlab
