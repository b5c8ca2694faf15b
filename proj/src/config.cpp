#include "updp/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include <json.hpp>
#include <openssl/evp.h>

#include "updp/errors.hpp"

namespace updp {
namespace {

using json = nlohmann::json;

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  const auto& node = obj.at(key);
  if constexpr (std::is_unsigned_v<T>) {
    if (!node.is_number_unsigned()) {
      throw ParseError(0, std::string("config field '") + key + "' must be a non-negative integer");
    }
  } else {
    if (!node.is_number()) throw ParseError(0, std::string("config field '") + key + "' must be a number");
  }
  try {
    out = node.get<T>();
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("config field '") + key + "': " + e.what());
  }
}

template <typename E>
void read_enum(const json& obj, const char* key, E& out, std::initializer_list<std::pair<const char*, E>> names) {
  if (!obj.contains(key)) return;
  if (!obj.at(key).is_string()) throw ParseError(0, std::string("config field '") + key + "' must be a string");
  const auto value = obj.at(key).get<std::string>();
  for (const auto& [name, e] : names) {
    if (value == name) {
      out = e;
      return;
    }
  }
  throw ParseError(0, std::string("config field '") + key + "': unknown value '" + value + "'");
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) throw ParseError(0, where + ": unknown field '" + key + "'");
  }
}

json to_json(const RunConfig& cfg) {
  const auto& p = cfg.pipeline;
  const auto& m = cfg.model;
  json out{
      {"eta", p.eta},
      {"T", p.T},
      {"K", p.K},
      {"lambda", p.lambda},
      {"tau", p.tau},
      {"mode", std::string(to_string(p.mode))},
      {"seed", p.seed},
      {"L_max", p.L_max},
      {"R", p.R},
      {"alpha", p.alpha},
      {"pair_report", std::string(to_string(p.pair_report))},
      {"init", std::string(to_string(p.init))},
  };
  out["model"] = json{
      {"D", m.D},
      {"pool_grid", m.pool_grid},
      {"image_h", m.image_h},
      {"image_w", m.image_w},
      {"min_count", m.min_count},
      {"embedding_seed", m.embedding_seed},
      {"encoder_seed", m.encoder_seed},
      {"generator_seed", m.generator_seed},
  };
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (D < 2) throw std::invalid_argument("config: model.D must be >= 2");
  if (pool_grid < 2) throw std::invalid_argument("config: model.pool_grid must be >= 2");
  if (image_h < ImageGray::kMinSide || image_w < ImageGray::kMinSide) {
    throw std::invalid_argument("config: model.image_h and model.image_w must be >= 8");
  }
  if (min_count < 1) throw std::invalid_argument("config: model.min_count must be >= 1");
}

std::string_view to_string(SelectionMode m) { return m == SelectionMode::greedy ? "greedy" : "softmax"; }
std::string_view to_string(PairReport p) { return p == PairReport::filtered ? "filtered" : "original"; }
std::string_view to_string(PromptInit p) { return p == PromptInit::raw_report ? "raw_report" : "random"; }

RunConfig parse_run_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError(0, "config must be a JSON object");
  reject_unknown(doc, {"eta", "T", "K", "lambda", "tau", "mode", "seed", "L_max", "R", "alpha", "pair_report", "init",
                       "model"},
                 "config");
  RunConfig cfg;
  auto& p = cfg.pipeline;
  read_field(doc, "eta", p.eta);
  read_field(doc, "T", p.T);
  read_field(doc, "K", p.K);
  read_field(doc, "lambda", p.lambda);
  read_field(doc, "tau", p.tau);
  read_enum(doc, "mode", p.mode, {{"greedy", SelectionMode::greedy}, {"softmax", SelectionMode::softmax}});
  read_field(doc, "seed", p.seed);
  read_field(doc, "L_max", p.L_max);
  read_field(doc, "R", p.R);
  read_field(doc, "alpha", p.alpha);
  read_enum(doc, "pair_report", p.pair_report, {{"original", PairReport::original}, {"filtered", PairReport::filtered}});
  read_enum(doc, "init", p.init, {{"raw_report", PromptInit::raw_report}, {"random", PromptInit::random}});
  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    if (!m.is_object()) throw ParseError(0, "config: model must be an object");
    reject_unknown(m, {"D", "pool_grid", "image_h", "image_w", "min_count", "embedding_seed", "encoder_seed",
                       "generator_seed"},
                   "config.model");
    read_field(m, "D", cfg.model.D);
    read_field(m, "pool_grid", cfg.model.pool_grid);
    read_field(m, "image_h", cfg.model.image_h);
    read_field(m, "image_w", cfg.model.image_w);
    read_field(m, "min_count", cfg.model.min_count);
    read_field(m, "embedding_seed", cfg.model.embedding_seed);
    read_field(m, "encoder_seed", cfg.model.encoder_seed);
    read_field(m, "generator_seed", cfg.model.generator_seed);
  }
  try {
    p.validate();
    cfg.model.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(0, e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string canonical_config_json(const RunConfig& cfg) { return to_json(cfg).dump(); }

std::string config_fingerprint(const RunConfig& cfg) { return sha256_hex(canonical_config_json(cfg)); }

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace updp
