#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "updp/encoders.hpp"
#include "updp/errors.hpp"
#include "updp/lexicon.hpp"
#include "updp/optimizer.hpp"
#include "updp/projection.hpp"
#include "updp/textkit.hpp"

namespace updp {

enum class PairReport { original, filtered };
enum class PromptInit { raw_report, random };

/// Every knob of one de-identification run. Field names follow the config file.
struct PipelineConfig {
  double eta = 0.05;          ///< learning rate
  std::size_t T = 50;         ///< descent steps per round
  std::size_t K = 20;         ///< candidates per position
  double lambda = 0.05;       ///< whitelist bias
  double tau = 1.0;           ///< softmax temperature
  SelectionMode mode = SelectionMode::greedy;
  std::uint64_t seed = 0;
  std::size_t L_max = 64;     ///< prompt length cap
  std::size_t R = 1;          ///< optimize/project rounds
  double alpha = 0.0;         ///< source-image blend of the generator
  PairReport pair_report = PairReport::filtered;
  PromptInit init = PromptInit::raw_report;

  /// Throws std::invalid_argument naming the first out-of-range field.
  void validate() const;
};

struct Record {
  std::string id;
  std::string patient_id;
  ImageGray image;
  std::string report;

  bool operator==(const Record&) const = default;
};

/// A prompt position whose initial token was blacklisted, and what replaced it.
struct TokenReplacement {
  std::size_t position = 0;
  TokenId original = 0;
  TokenId replacement = 0;
};

struct RoundSummary {
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

struct DeidAudit {
  std::vector<Removal> removals;
  std::vector<TokenReplacement> replacements;
  std::vector<RoundSummary> rounds;
  std::vector<PositionDump> candidates;  ///< verbose mode only
};

struct DeidRecord {
  std::string id;
  std::string patient_id;
  ImageGray image;
  std::string report;
  TokenSeq prompt_tokens;
  DeidAudit audit;
};

/// Prompt-conditioned image synthesizer:
///   base = sigmoid(W_g * mean_j e(y_j) + b)
///   out  = (1 - alpha) * base + alpha * lowpass(source)
class ToyGenerator {
 public:
  ToyGenerator(std::size_t dim, std::size_t out_h, std::size_t out_w, double alpha, std::uint64_t seed);
  ToyGenerator(Matrix weights, Vector bias, std::size_t out_h, std::size_t out_w, double alpha,
               std::uint64_t seed = 0);

  std::size_t dim() const { return static_cast<std::size_t>(weights_.cols()); }
  std::size_t out_h() const { return out_h_; }
  std::size_t out_w() const { return out_w_; }
  double alpha() const { return alpha_; }
  std::uint64_t seed() const { return seed_; }
  const Matrix& weights() const { return weights_; }
  const Vector& bias() const { return bias_; }

  ToyGenerator with_alpha(double alpha) const;

 private:
  Matrix weights_;  // (out_h * out_w) x D
  Vector bias_;
  std::size_t out_h_;
  std::size_t out_w_;
  double alpha_;
  std::uint64_t seed_;
};

/// Means over 4x4 pixel blocks, upsampled back to full resolution.
ImageGray block_lowpass(const ImageGray& image);

ImageGray generate_image(const TokenSeq& tokens, const ImageGray* source, const ToyGenerator& gen,
                         const EmbeddingTable& table);

/// Shared, immutable dependencies of a run.
struct PipelineDeps {
  const Lexicon& lexicon;
  const Vocabulary& vocab;
  const EmbeddingTable& table;
  const Encoder& encoder;
  const ToyGenerator& generator;
};

/// Dependencies plus the derived token-id sets, computed once per run.
class DeidContext {
 public:
  DeidContext(const PipelineDeps& deps, const PipelineConfig& cfg);

  const PipelineDeps& deps() const { return deps_; }
  const PipelineConfig& config() const { return cfg_; }
  const TokenIdSets& ids() const { return ids_; }
  /// Projection parameters; reserved tokens are never projection targets.
  const ProjectionParams& projection() const { return projection_; }

 private:
  PipelineDeps deps_;
  PipelineConfig cfg_;
  TokenIdSets ids_;
  ProjectionParams projection_;
};

/// Raised for a single record; carries the record id.
class RecordError : public Error {
 public:
  RecordError(std::string record_id, const std::string& what)
      : Error("record '" + record_id + "': " + what), record_id_(std::move(record_id)) {}
  const std::string& record_id() const noexcept { return record_id_; }

 private:
  std::string record_id_;
};

/// Algorithm body for one record. `rng` drives random initialization and
/// softmax selection.
DeidRecord deid_record(const Record& rec, const DeidContext& ctx, Rng& rng, bool verbose_audit = false);

struct RecordFailure {
  std::size_t index = 0;
  std::string id;
  std::string message;
};

struct DeidRunResult {
  std::vector<DeidRecord> records;  ///< successful records, in input order
  std::vector<RecordFailure> failures;
};

/// Runs every record with its own generator seeded by derive_seed(cfg.seed, index);
/// output does not depend on `workers`. Throws std::invalid_argument on duplicate ids.
DeidRunResult deid_dataset(const std::vector<Record>& records, const DeidContext& ctx, std::size_t workers = 1,
                           bool verbose_audit = false);

// ---- dataset files ----------------------------------------------------------

enum class ImageStorage { inline_pixels, pgm_files };

/// One JSON object per line: id, patient_id, report, and image given as
/// {"path": "<pgm>"} (relative to the dataset file) or {"h", "w", "pixels"}.
std::vector<Record> read_dataset(const std::filesystem::path& path);

/// PGM images go to `<path>.images/<index>.pgm`.
void write_dataset(const std::vector<Record>& records, const std::filesystem::path& path,
                   ImageStorage storage = ImageStorage::inline_pixels);

/// The record line format extended with prompt_tokens, prompt_text and audit.
std::string serialize_deid_record(const DeidRecord& rec, const Vocabulary& vocab, const std::string& image_ref);
void write_deid_dataset(const std::vector<DeidRecord>& records, const Vocabulary& vocab,
                        const std::filesystem::path& path, ImageStorage storage = ImageStorage::pgm_files);

ImageGray read_pgm(const std::filesystem::path& path);
/// 8-bit binary PGM (P5, maxval 255); values are rounded to the nearest level.
void write_pgm(const ImageGray& image, const std::filesystem::path& path);

}  // namespace updp
