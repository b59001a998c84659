#pragma once

// Flat `key = value` run configuration. Every key has a default and a help
// line; unknown keys are rejected. The resolved configuration is written next
// to each command's outputs.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fcmad/error.hpp"
#include "fcmad/evalbench.hpp"
#include "fcmad/fused_loss.hpp"
#include "fcmad/image.hpp"
#include "fcmad/kinds.hpp"
#include "fcmad/morph.hpp"
#include "fcmad/nn.hpp"
#include "fcmad/synth.hpp"
#include "fcmad/trainer.hpp"

namespace fcmad {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "1", "root seed; every random stream is derived from it"},
      {"data_dir", "data", "dataset directory (images, manifests, split files)"},
      {"out_dir", "out", "output directory of the command"},
      {"identities", "200", "number of synthetic identities"},
      {"images_per_identity", "20", "bona fide renders per identity"},
      {"image_size", "32", "image width and height in pixels"},
      {"latent_dim", "16", "dimension of the identity latent"},
      {"geometry_scale", "1.2", "landmark offset in px per unit latent projection"},
      {"palette_scale", "0.15", "intensity change per unit latent projection"},
      {"pose_jitter", "0.5", "per-render global shift std (px)"},
      {"landmark_jitter", "0.3", "per-render landmark std (px)"},
      {"pixel_noise", "0.03", "additive pixel noise std"},
      {"illumination_jitter", "0.04", "per-render gain and bias std"},
      {"min_latent_angle_deg", "20", "minimum angle between identity latents"},
      {"holdout_fraction", "0.1", "share of each identity subset held out for evaluation"},
      {"blend_alpha", "0.5", "morph blending coefficient"},
      {"family", "both", "gen-morphs: landmark | latent | both"},
      {"morph_ratio", "1.0", "gen-morphs: morphs per training bona fide, per family"},
      {"selfmorph_ratio", "0.5", "gen-morphs: selfmorphs per training bona fide, per family"},
      {"eval_morph_ratio", "2.0", "gen-morphs: morphs per held-out bona fide, per family"},
      {"train_family", "landmark", "train: morph families in the corpus (landmark | latent | both)"},
      {"protocol_family", "latent", "gen-protocol: morph family of the attack pairs"},
      {"bona_fide_pairs", "300", "gen-protocol: maximum number of bona fide pairs"},
      {"morphs_per_bona_fide", "5", "gen-protocol: attack pairs per bona fide pair"},
      {"variant", "fc-v2", "train: bc | fc-v1 | fc-v2 | fr"},
      {"hidden", "256", "hidden layer widths, comma separated"},
      {"feature_dim", "64", "backbone feature dimension"},
      {"activation", "relu", "hidden activation: relu | leaky-relu | tanh"},
      {"normalize_features", "false", "use the cosine instead of the raw dot product in the pair loss"},
      {"input_std", "0.25", "per-image input standardization target std (0 = raw pixels)"},
      {"epochs", "5", "training epochs"},
      {"batch_size", "28", "pairs per batch"},
      {"momentum", "0.9", "SGD momentum"},
      {"lr_start", "0.01", "learning rate at the first step"},
      {"lr_end", "0.0001", "learning rate at the last step"},
      {"first_identity_weight", "1", "weight of the First network identity loss"},
      {"second_identity_weight", "1", "weight of the Second network identity loss"},
      {"binary_weight", "1", "weight of the binary pair loss"},
      {"log_every", "100", "train: progress line every N steps (0 = silent)"},
      {"checkpoint", "", "eval: dual-network checkpoint"},
      {"fr_checkpoint", "", "eval: optional FR checkpoint for score fusion"},
      {"fusion", "dissimilarity", "eval: dissimilarity | similarity"},
      {"protocol", "", "eval/compare: protocol file"},
      {"delta", "0.1,0.01", "eval/compare: BPCER operating points, comma separated"},
  };
  return keys;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_keys()) values_[k.name] = k.default_value;
  }

  static bool known(const std::string& key) { return find(key) != nullptr; }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  const std::string& get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  void load(std::istream& in, const std::string& name = "config") {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      const std::string body = trim(std::string_view(line).substr(0, hash));
      if (body.empty()) continue;
      const auto eq = body.find('=');
      const std::string where = name + ":" + std::to_string(lineno);
      if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
      const std::string key = trim(std::string_view(body).substr(0, eq));
      if (!known(key)) throw ConfigError(where + ": unknown config key '" + key + "'");
      values_[key] = trim(std::string_view(body).substr(eq + 1));
    }
  }

  void load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    load(in, path.string());
  }

  /// All keys in declaration order.
  void write(std::ostream& out) const {
    for (const auto& k : config_keys()) out << k.name << " = " << get(k.name) << '\n';
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write(out);
  }

  std::vector<std::pair<std::string, std::string>> entries() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& k : config_keys()) out.emplace_back(k.name, get(k.name));
    return out;
  }

  double number(const std::string& key) const {
    try {
      return parse_double(get(key));
    } catch (const Error&) {
      throw ConfigError("config key '" + key + "': expected a number, got '" + get(key) + "'");
    }
  }

  std::size_t count(const std::string& key) const {
    const std::string& v = get(key);
    std::size_t pos = 0;
    unsigned long long n = 0;
    try {
      n = std::stoull(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (v.empty() || pos != v.size() || v.front() == '-') {
      throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
    return static_cast<std::size_t>(n);
  }

  bool flag(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(get(key));
    for (std::string item; std::getline(ss, item, ',');) {
      try {
        out.push_back(parse_double(trim(item)));
      } catch (const Error&) {
        throw ConfigError("config key '" + key + "': bad list item '" + item + "'");
      }
    }
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
  }

  std::uint64_t seed() const { return count("seed"); }

  SynthConfig synth() const {
    SynthConfig c;
    c.width = c.height = count("image_size");
    c.latent_dim = count("latent_dim");
    c.geometry_scale = number("geometry_scale");
    c.palette_scale = number("palette_scale");
    c.pose_jitter = number("pose_jitter");
    c.landmark_jitter = number("landmark_jitter");
    c.pixel_noise = number("pixel_noise");
    c.illumination_jitter = number("illumination_jitter");
    c.min_latent_angle_deg = number("min_latent_angle_deg");
    c.validate();
    return c;
  }

  MorphConfig morph() const {
    MorphConfig c;
    c.blend_alpha = number("blend_alpha");
    if (!(c.blend_alpha >= 0.0 && c.blend_alpha <= 1.0)) throw ConfigError("blend_alpha must be in [0, 1]");
    return c;
  }

  /// Families named by `key`: landmark, latent, or both.
  std::vector<MorphFamily> families(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "both") return {MorphFamily::Landmark, MorphFamily::Latent};
    try {
      return {morph_family_from_string(v)};
    } catch (const Error&) {
      throw ConfigError("config key '" + key + "': expected landmark, latent or both, got '" + v + "'");
    }
  }

  ModelConfig model(std::size_t num_identities) const {
    ModelConfig m;
    m.input_dim = count("image_size") * count("image_size");
    m.hidden.clear();
    std::stringstream ss(get("hidden"));
    for (std::string item; std::getline(ss, item, ',');) {
      const std::string t = trim(item);
      if (t.empty()) continue;
      std::size_t pos = 0;
      unsigned long long n = 0;
      try {
        n = std::stoull(t, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != t.size() || n == 0) throw ConfigError("config key 'hidden': bad width '" + t + "'");
      m.hidden.push_back(static_cast<std::size_t>(n));
    }
    m.feature_dim = count("feature_dim");
    if (m.feature_dim == 0) throw ConfigError("feature_dim must be > 0");
    try {
      m.hidden_activation = activation_from_string(get("activation"));
    } catch (const Error&) {
      throw ConfigError("config key 'activation': unknown activation '" + get("activation") + "'");
    }
    m.normalize_features = flag("normalize_features");
    m.input_std = number("input_std");
    m.num_identities = num_identities;
    return m;
  }

  SgdConfig sgd() const {
    SgdConfig c;
    c.momentum = number("momentum");
    c.lr_start = number("lr_start");
    c.lr_end = number("lr_end");
    c.epochs = count("epochs");
    c.batch_size = count("batch_size");
    c.validate();
    return c;
  }

  LossWeights weights() const {
    LossWeights w{number("first_identity_weight"), number("second_identity_weight"), number("binary_weight")};
    if (!(w.first_identity >= 0.0 && w.second_identity >= 0.0 && w.binary >= 0.0)) {
      throw ConfigError("loss weights must be >= 0");
    }
    return w;
  }

  ProtocolOptions protocol_options() const {
    ProtocolOptions p;
    p.bona_fide_pairs = count("bona_fide_pairs");
    p.morphs_per_bona_fide = number("morphs_per_bona_fide");
    if (!(p.morphs_per_bona_fide >= 0.0)) throw ConfigError("morphs_per_bona_fide must be >= 0");
    return p;
  }

  FusionMode fusion() const {
    const std::string& v = get("fusion");
    if (v == "dissimilarity") return FusionMode::Dissimilarity;
    if (v == "similarity") return FusionMode::Similarity;
    throw ConfigError("config key 'fusion': expected dissimilarity or similarity, got '" + v + "'");
  }

  std::vector<double> deltas() const {
    auto d = numbers("delta");
    for (double x : d) {
      if (!(x > 0.0 && x < 1.0)) throw ConfigError("delta values must be in (0, 1)");
    }
    return d;
  }

 private:
  static const ConfigKey* find(const std::string& key) {
    for (const auto& k : config_keys()) {
      if (k.name == key) return &k;
    }
    return nullptr;
  }

  std::map<std::string, std::string> values_;
};

/// One line per key for --help output.
inline std::string config_help() {
  std::ostringstream os;
  os << "Configuration keys (config file `key = value`, or `--key value` on the command line):\n";
  for (const auto& k : config_keys()) {
    os << "  " << k.name;
    for (std::size_t i = k.name.size(); i < 24; ++i) os << ' ';
    os << k.help << " [" << k.default_value << "]\n";
  }
  return os.str();
}

}  // namespace fcmad
