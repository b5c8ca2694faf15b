#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "updp/lexicon.hpp"
#include "updp/linalg.hpp"
#include "updp/vocabulary.hpp"

namespace updp {

/// |V| x D table of token embeddings; row t is e(t).
class EmbeddingTable {
 public:
  /// Throws std::invalid_argument unless all entries are finite, D >= 2 and
  /// there are at least as many rows as reserved tokens.
  explicit EmbeddingTable(Matrix rows, std::uint64_t seed = 0);

  /// I.i.d. standard normal rows, each scaled to unit l2 norm.
  static EmbeddingTable generate(std::size_t vocab_size, std::size_t dim, std::uint64_t seed);

  /// Header line `|V| D seed`, then |V|*D little-endian float32 values in
  /// row-major order. A header with no payload regenerates from the seed.
  static EmbeddingTable read(std::istream& in);
  void write(std::ostream& out) const;

  std::size_t size() const { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(rows_.cols()); }
  std::uint64_t seed() const { return seed_; }
  const Matrix& matrix() const { return rows_; }
  auto row(TokenId t) const { return rows_.row(t); }

  /// Rows scaled to unit norm; a zero row stays zero and is flagged.
  const Matrix& unit_rows() const { return unit_rows_; }
  bool has_zero_row() const { return has_zero_row_; }

 private:
  Matrix rows_;
  Matrix unit_rows_;
  std::uint64_t seed_ = 0;
  bool has_zero_row_ = false;
};

/// L x D continuous prompt; row j is the embedding at position j.
struct SoftPrompt {
  Matrix values;

  SoftPrompt() = default;
  explicit SoftPrompt(Matrix m);

  std::size_t length() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
};

/// Reserved tokens first, then every word with frequency >= min_count in
/// lexicographic order. Throws std::invalid_argument on an empty corpus.
Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_count);

/// Lowercased words mapped to ids ([UNK] when absent), truncated to max_len.
/// An empty report yields a single [UNK].
TokenSeq tokenize(std::string_view report, const Vocabulary& vocab, std::size_t max_len);

/// Row j of the result is an exact copy of table row seq.ids[j].
SoftPrompt embed(const TokenSeq& seq, const EmbeddingTable& table);

/// Entries i.i.d. standard normal from a generator seeded with `seed`.
SoftPrompt random_prompt(std::size_t length, std::size_t dim, std::uint64_t seed);

std::string detokenize(const TokenSeq& seq, const Vocabulary& vocab);

inline constexpr std::string_view kDeidPlaceholder = "[DEID]";

struct Removal {
  std::size_t begin = 0;  ///< byte span in the input report
  std::size_t end = 0;
  std::string surface;
  Category category = Category::other;

  bool operator==(const Removal&) const = default;
};

struct FilteredReport {
  std::string text;
  std::vector<Removal> removals;
};

/// Replaces every blacklist phrase with one "[DEID]" placeholder; everything
/// else, whitelist phrases included, is copied byte for byte.
FilteredReport filter_report(std::string_view text, const Lexicon& lex);

}  // namespace updp
