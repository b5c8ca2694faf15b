#include "updp/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "updp/errors.hpp"
#include "updp/rng.hpp"

namespace updp {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::size_t kLowpassBlock = 4;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("config: " + what);
}

}  // namespace

void PipelineConfig::validate() const {
  require(std::isfinite(eta) && eta >= 0.0, "eta must be finite and >= 0");
  require(K >= 1, "K must be >= 1");
  require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be finite and >= 0");
  require(std::isfinite(tau) && tau > 0.0, "tau must be finite and > 0");
  require(L_max >= 1, "L_max must be >= 1");
  require(R >= 1, "R must be >= 1");
  require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0,1]");
}

// ---- generator --------------------------------------------------------------

ToyGenerator::ToyGenerator(std::size_t dim, std::size_t out_h, std::size_t out_w, double alpha,
                           std::uint64_t seed)
    : out_h_(out_h), out_w_(out_w), alpha_(alpha), seed_(seed) {
  if (dim < 2) throw std::invalid_argument("generator dimension must be at least 2");
  if (out_h < ImageGray::kMinSide || out_w < ImageGray::kMinSide) {
    throw std::invalid_argument("generator output must be at least 8x8");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0,1]");
  Rng rng(seed);
  std::normal_distribution<double> w(0.0, 2.0);
  std::normal_distribution<double> b(0.0, 0.5);
  weights_.resize(static_cast<Eigen::Index>(out_h * out_w), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
    for (Eigen::Index j = 0; j < weights_.cols(); ++j) weights_(i, j) = w(rng);
  }
  bias_.resize(weights_.rows());
  for (Eigen::Index i = 0; i < bias_.size(); ++i) bias_(i) = b(rng);
}

ToyGenerator::ToyGenerator(Matrix weights, Vector bias, std::size_t out_h, std::size_t out_w, double alpha,
                           std::uint64_t seed)
    : weights_(std::move(weights)), bias_(std::move(bias)), out_h_(out_h), out_w_(out_w), alpha_(alpha), seed_(seed) {
  if (weights_.rows() != static_cast<Eigen::Index>(out_h * out_w) || bias_.size() != weights_.rows()) {
    throw std::invalid_argument("generator weights must be (out_h*out_w) x D with a matching bias");
  }
  if (out_h < ImageGray::kMinSide || out_w < ImageGray::kMinSide) {
    throw std::invalid_argument("generator output must be at least 8x8");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0,1]");
  if (!weights_.allFinite() || !bias_.allFinite()) throw std::invalid_argument("generator weights must be finite");
}

ToyGenerator ToyGenerator::with_alpha(double alpha) const {
  return ToyGenerator(weights_, bias_, out_h_, out_w_, alpha, seed_);
}

ImageGray block_lowpass(const ImageGray& image) {
  const std::size_t h = image.height();
  const std::size_t w = image.width();
  std::vector<double> out(h * w);
  for (std::size_t r0 = 0; r0 < h; r0 += kLowpassBlock) {
    const std::size_t r1 = std::min(h, r0 + kLowpassBlock);
    for (std::size_t c0 = 0; c0 < w; c0 += kLowpassBlock) {
      const std::size_t c1 = std::min(w, c0 + kLowpassBlock);
      double sum = 0.0;
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) sum += image.at(r, c);
      }
      const double mean = std::clamp(sum / static_cast<double>((r1 - r0) * (c1 - c0)), 0.0, 1.0);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) out[r * w + c] = mean;
      }
    }
  }
  return ImageGray(h, w, std::move(out));
}

ImageGray generate_image(const TokenSeq& tokens, const ImageGray* source, const ToyGenerator& gen,
                         const EmbeddingTable& table) {
  if (tokens.ids.empty()) throw std::invalid_argument("generate_image needs a non-empty prompt");
  if (gen.dim() != table.dim()) throw std::invalid_argument("generator and embedding dimensions differ");
  Vector mean = Vector::Zero(static_cast<Eigen::Index>(table.dim()));
  for (const auto id : tokens.ids) {
    if (id >= table.size()) throw std::out_of_range("token id outside embedding table");
    mean += table.row(id).transpose();
  }
  mean /= static_cast<double>(tokens.ids.size());
  const Vector pre = gen.weights() * mean + gen.bias();

  const std::size_t h = gen.out_h();
  const std::size_t w = gen.out_w();
  std::vector<double> pixels(h * w);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = 1.0 / (1.0 + std::exp(-pre(static_cast<Eigen::Index>(i))));
  }
  if (source != nullptr) {
    const ImageGray low = block_lowpass(*source);
    const double a = gen.alpha();
    for (std::size_t r = 0; r < h; ++r) {
      const std::size_t sr = r * low.height() / h;
      for (std::size_t c = 0; c < w; ++c) {
        const std::size_t sc = c * low.width() / w;
        double& px = pixels[r * w + c];
        px = (1.0 - a) * px + a * low.at(sr, sc);
      }
    }
  }
  for (auto& px : pixels) px = std::clamp(px, 0.0, 1.0);
  return ImageGray(h, w, std::move(pixels));
}

// ---- per-record pipeline ----------------------------------------------------

DeidContext::DeidContext(const PipelineDeps& deps, const PipelineConfig& cfg) : deps_(deps), cfg_(cfg) {
  cfg_.validate();
  if (deps.vocab.size() != deps.table.size()) {
    throw std::invalid_argument("vocabulary has " + std::to_string(deps.vocab.size()) +
                                " entries but the embedding table has " + std::to_string(deps.table.size()));
  }
  if (deps.encoder.dim() != deps.table.dim()) throw std::invalid_argument("encoder and embedding dimensions differ");
  if (deps.generator.dim() != deps.table.dim()) throw std::invalid_argument("generator and embedding dimensions differ");
  if (deps.generator.alpha() != cfg_.alpha) throw std::invalid_argument("generator alpha differs from config alpha");
  ids_ = token_id_sets(deps.lexicon, deps.vocab);
  projection_.forbidden = ids_.forbidden;
  for (TokenId id = 0; id < kReservedCount; ++id) projection_.forbidden.insert(id);
  projection_.preferred = ids_.preferred;
  projection_.top_k = cfg_.K;
  projection_.lambda = cfg_.lambda;
  projection_.policy = SelectionPolicy{cfg_.mode, cfg_.tau};
}

DeidRecord deid_record(const Record& rec, const DeidContext& ctx, Rng& rng, bool verbose_audit) {
  const auto& deps = ctx.deps();
  const auto& cfg = ctx.config();
  try {
    const TokenSeq seq = tokenize(rec.report, deps.vocab, cfg.L_max);
    const SoftPrompt initial = cfg.init == PromptInit::raw_report
                                   ? embed(seq, deps.table)
                                   : random_prompt(seq.size(), deps.table.dim(), rng());
    const FeatureVec image_feature = deps.encoder.encode_image(rec.image);
    auto refined = refine_cycle(initial, image_feature, deps.encoder, deps.table, ctx.projection(), cfg.eta, cfg.T,
                                cfg.R, rng, verbose_audit);

    DeidRecord out;
    out.id = rec.id;
    out.patient_id = rec.patient_id;
    out.image = generate_image(refined.tokens, cfg.alpha > 0.0 ? &rec.image : nullptr, deps.generator, deps.table);
    auto filtered = filter_report(rec.report, deps.lexicon);
    out.report = cfg.pair_report == PairReport::filtered ? std::move(filtered.text) : rec.report;
    out.audit.removals = std::move(filtered.removals);
    for (std::size_t j = 0; j < seq.size(); ++j) {
      if (ctx.ids().forbidden.contains(seq.ids[j])) {
        out.audit.replacements.push_back({j, seq.ids[j], refined.tokens.ids[j]});
      }
    }
    for (const auto& trace : refined.traces) {
      out.audit.rounds.push_back({trace.initial_loss(), trace.final_loss()});
    }
    out.audit.candidates = std::move(refined.last_dump);
    out.prompt_tokens = std::move(refined.tokens);
    return out;
  } catch (const RecordError&) {
    throw;
  } catch (const std::exception& e) {
    throw RecordError(rec.id, e.what());
  }
}

DeidRunResult deid_dataset(const std::vector<Record>& records, const DeidContext& ctx, std::size_t workers,
                           bool verbose_audit) {
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second) throw std::invalid_argument("duplicate record id '" + r.id + "'");
  }
  const std::size_t n = records.size();
  std::vector<std::optional<DeidRecord>> slots(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};

  const auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      Rng rng = make_rng(ctx.config().seed, i);
      try {
        slots[i] = deid_record(records[i], ctx, rng, verbose_audit);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }

  DeidRunResult result;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) {
      result.records.push_back(std::move(*slots[i]));
    } else {
      result.failures.push_back({i, records[i].id, errors[i]});
    }
  }
  return result;
}

// ---- files ------------------------------------------------------------------

ImageGray read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open image " + path.string());
  const auto next_field = [&in, &path]() {
    std::string tok;
    while (in) {
      const int c = in.peek();
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    if (!(in >> tok)) throw Error("truncated PGM header in " + path.string());
    return tok;
  };
  if (next_field() != "P5") throw Error(path.string() + " is not a binary PGM (P5)");
  std::size_t w = 0;
  std::size_t h = 0;
  int maxval = 0;
  try {
    w = std::stoul(next_field());
    h = std::stoul(next_field());
    maxval = std::stoi(next_field());
  } catch (const std::logic_error&) {
    throw Error("malformed PGM header in " + path.string());
  }
  if (maxval < 1 || maxval > 255) throw Error(path.string() + ": only 8-bit PGM is supported");
  in.get();  // single whitespace before the raster
  std::vector<unsigned char> raw(w * h);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw Error("truncated PGM raster in " + path.string());
  }
  std::vector<double> px(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] > maxval) throw Error(path.string() + ": sample exceeds maxval");
    px[i] = static_cast<double>(raw[i]) / static_cast<double>(maxval);
  }
  return ImageGray(h, w, std::move(px));
}

void write_pgm(const ImageGray& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write image " + path.string());
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::string raster(image.pixels().size(), '\0');
  for (std::size_t i = 0; i < raster.size(); ++i) {
    raster[i] = static_cast<char>(static_cast<unsigned char>(std::lround(image.pixels()[i] * 255.0)));
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw Error("failed writing image " + path.string());
}

namespace {

std::string image_file_name(std::size_t index) {
  std::ostringstream ss;
  ss << std::setw(6) << std::setfill('0') << index << ".pgm";
  return ss.str();
}

// Writes the image as requested and returns its JSON reference.
ordered_json store_image(const ImageGray& image, std::size_t index, const std::filesystem::path& dataset,
                         ImageStorage storage) {
  if (storage == ImageStorage::inline_pixels) {
    return ordered_json{{"h", image.height()}, {"w", image.width()}, {"pixels", image.pixels()}};
  }
  const std::filesystem::path dir_name = dataset.filename().string() + ".images";
  const std::filesystem::path dir = dataset.parent_path() / dir_name;
  std::filesystem::create_directories(dir);
  write_pgm(image, dir / image_file_name(index));
  return ordered_json{{"path", (dir_name / image_file_name(index)).generic_string()}};
}

ImageGray parse_image(const json& node, const std::filesystem::path& base, const std::string& rec_id) {
  if (!node.is_object()) throw Error("record '" + rec_id + "': image must be an object");
  if (node.contains("path")) {
    const auto rel = node.at("path").get<std::string>();
    const std::filesystem::path p = std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel) : base / rel;
    if (!std::filesystem::exists(p)) throw Error("record '" + rec_id + "': missing image file " + p.string());
    return read_pgm(p);
  }
  const auto h = node.at("h").get<std::size_t>();
  const auto w = node.at("w").get<std::size_t>();
  auto pixels = node.at("pixels").get<std::vector<double>>();
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (!(pixels[i] >= 0.0 && pixels[i] <= 1.0)) {
      throw Error("record '" + rec_id + "': pixel " + std::to_string(i) + " value " + std::to_string(pixels[i]) +
                  " outside [0,1]");
    }
  }
  try {
    return ImageGray(h, w, std::move(pixels));
  } catch (const std::invalid_argument& e) {
    throw Error("record '" + rec_id + "': " + e.what());
  }
}

}  // namespace

std::vector<Record> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset " + path.string());
  const auto base = path.parent_path();
  std::vector<Record> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json node = json::parse(line);
      Record r;
      r.id = node.at("id").get<std::string>();
      r.patient_id = node.at("patient_id").get<std::string>();
      r.report = node.at("report").get<std::string>();
      r.image = parse_image(node.at("image"), base, r.id);
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(line_no, path.string() + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(line_no, path.string() + ": " + e.what());
    }
  }
  return out;
}

void write_dataset(const std::vector<Record>& records, const std::filesystem::path& path, ImageStorage storage) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset " + path.string());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    ordered_json node{{"id", r.id}, {"patient_id", r.patient_id}, {"report", r.report}};
    node["image"] = store_image(r.image, i, path, storage);
    out << node.dump() << '\n';
  }
}

namespace {

ordered_json audit_json(const DeidAudit& audit) {
  ordered_json removals = ordered_json::array();
  for (const auto& r : audit.removals) {
    removals.push_back({{"begin", r.begin}, {"end", r.end}, {"surface", r.surface},
                        {"category", std::string(to_string(r.category))}});
  }
  ordered_json replacements = ordered_json::array();
  for (const auto& r : audit.replacements) {
    replacements.push_back({{"position", r.position}, {"original", r.original}, {"replacement", r.replacement}});
  }
  ordered_json rounds = ordered_json::array();
  for (const auto& r : audit.rounds) {
    rounds.push_back({{"initial_loss", r.initial_loss}, {"final_loss", r.final_loss}});
  }
  ordered_json node{{"removals", removals}, {"replacements", replacements}, {"rounds", rounds}};
  if (!audit.candidates.empty()) {
    ordered_json dump = ordered_json::array();
    for (const auto& p : audit.candidates) {
      ordered_json ids = ordered_json::array();
      ordered_json raw = ordered_json::array();
      ordered_json biased = ordered_json::array();
      for (const auto& c : p.candidates) {
        ids.push_back(c.id);
        raw.push_back(c.score);
        biased.push_back(c.biased);
      }
      dump.push_back({{"position", p.position}, {"ids", ids}, {"s", raw}, {"s_biased", biased}, {"chosen", p.chosen}});
    }
    node["candidates"] = std::move(dump);
  }
  return node;
}

}  // namespace

std::string serialize_deid_record(const DeidRecord& rec, const Vocabulary& vocab, const std::string& image_ref) {
  ordered_json node{{"id", rec.id}, {"patient_id", rec.patient_id}, {"report", rec.report}};
  node["image"] = image_ref.empty()
                      ? ordered_json{{"h", rec.image.height()}, {"w", rec.image.width()}, {"pixels", rec.image.pixels()}}
                      : ordered_json{{"path", image_ref}};
  node["prompt_tokens"] = rec.prompt_tokens.ids;
  node["prompt_text"] = detokenize(rec.prompt_tokens, vocab);
  node["audit"] = audit_json(rec.audit);
  return node.dump();
}

void write_deid_dataset(const std::vector<DeidRecord>& records, const Vocabulary& vocab,
                        const std::filesystem::path& path, ImageStorage storage) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset " + path.string());
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::string ref;
    if (storage == ImageStorage::pgm_files) ref = store_image(records[i].image, i, path, storage).at("path");
    out << serialize_deid_record(records[i], vocab, ref) << '\n';
  }
}

}  // namespace updp
