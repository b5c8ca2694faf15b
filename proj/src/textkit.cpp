#include "updp/textkit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "updp/errors.hpp"
#include "updp/rng.hpp"
#include "updp/words.hpp"

namespace updp {
namespace {

constexpr const char* kReservedSurfaces[kReservedCount] = {"[PAD]", "[UNK]", "[BOS]", "[EOS]"};

void write_f32_le(std::ostream& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  char buf[4];
  for (int k = 0; k < 4; ++k) buf[k] = static_cast<char>((bits >> (8 * k)) & 0xFF);
  out.write(buf, 4);
}

bool read_f32_le(std::istream& in, float& v) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4)) return false;
  std::uint32_t bits = 0;
  for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(buf[k]) << (8 * k);
  v = std::bit_cast<float>(bits);
  return true;
}

}  // namespace

Vocabulary::Vocabulary() {
  for (TokenId id = 0; id < kReservedCount; ++id) {
    surfaces_.emplace_back(kReservedSurfaces[id]);
    index_.emplace(surfaces_.back(), id);
  }
}

Vocabulary::Vocabulary(const std::vector<std::string>& words) : Vocabulary() {
  for (const auto& w : words) {
    if (w.empty()) throw std::invalid_argument("vocabulary surface must be non-empty");
    const auto id = static_cast<TokenId>(surfaces_.size());
    if (!index_.emplace(w, id).second) {
      throw std::invalid_argument("duplicate vocabulary surface '" + w + "'");
    }
    surfaces_.push_back(w);
  }
}

const std::string& Vocabulary::surface(TokenId id) const {
  if (id >= surfaces_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(surfaces_.size()));
  }
  return surfaces_[id];
}

std::optional<TokenId> Vocabulary::find(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id_or_unk(std::string_view word) const { return find(word).value_or(kUnkId); }

EmbeddingTable::EmbeddingTable(Matrix rows, std::uint64_t seed) : rows_(std::move(rows)), seed_(seed) {
  if (rows_.cols() < 2) throw std::invalid_argument("embedding dimension must be at least 2");
  if (rows_.rows() < static_cast<Eigen::Index>(kReservedCount)) {
    throw std::invalid_argument("embedding table needs a row for every reserved token");
  }
  if (!rows_.allFinite()) throw std::invalid_argument("embedding table has non-finite entries");
  unit_rows_ = rows_;
  for (Eigen::Index t = 0; t < rows_.rows(); ++t) {
    const double n = rows_.row(t).norm();
    if (n > 0.0) {
      unit_rows_.row(t) /= n;
    } else {
      has_zero_row_ = true;
    }
  }
}

EmbeddingTable EmbeddingTable::generate(std::size_t vocab_size, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(vocab_size, dim);
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    for (Eigen::Index d = 0; d < m.cols(); ++d) m(t, d) = normal(rng);
    const double n = m.row(t).norm();
    if (n > 0.0) m.row(t) /= n;
  }
  return EmbeddingTable(std::move(m), seed);
}

EmbeddingTable EmbeddingTable::read(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw ParseError(1, "embedding table: missing header");
  std::istringstream hs(header);
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  std::string extra;
  if (!(hs >> vocab_size >> dim >> seed) || (hs >> extra)) {
    throw ParseError(1, "embedding table: header must be '|V| D seed'");
  }
  if (in.peek() == std::char_traits<char>::eof()) return generate(vocab_size, dim, seed);
  Matrix m(vocab_size, dim);
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    for (Eigen::Index d = 0; d < m.cols(); ++d) {
      float v = 0.0f;
      if (!read_f32_le(in, v)) {
        throw ParseError(0, "embedding table: truncated payload at row " + std::to_string(t));
      }
      m(t, d) = static_cast<double>(v);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError(0, "embedding table: trailing bytes after payload");
  }
  return EmbeddingTable(std::move(m), seed);
}

void EmbeddingTable::write(std::ostream& out) const {
  out << size() << ' ' << dim() << ' ' << seed_ << '\n';
  for (Eigen::Index t = 0; t < rows_.rows(); ++t) {
    for (Eigen::Index d = 0; d < rows_.cols(); ++d) write_f32_le(out, static_cast<float>(rows_(t, d)));
  }
}

SoftPrompt::SoftPrompt(Matrix m) : values(std::move(m)) {
  if (values.rows() < 1) throw std::invalid_argument("soft prompt needs at least one position");
  if (!values.allFinite()) throw std::invalid_argument("soft prompt has non-finite entries");
}

Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_count) {
  if (corpus.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& report : corpus) {
    for (auto& w : split_words(report)) ++counts[std::move(w.folded)];
  }
  std::vector<std::string> words;
  for (const auto& [w, c] : counts) {
    if (c >= min_count) words.push_back(w);
  }
  return Vocabulary(words);
}

TokenSeq tokenize(std::string_view report, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("max_len must be at least 1");
  TokenSeq seq;
  for (const auto& w : split_words(report)) {
    if (seq.ids.size() == max_len) break;
    seq.ids.push_back(vocab.id_or_unk(w.folded));
  }
  if (seq.ids.empty()) seq.ids.push_back(kUnkId);
  return seq;
}

SoftPrompt embed(const TokenSeq& seq, const EmbeddingTable& table) {
  if (seq.ids.empty()) throw std::invalid_argument("cannot embed an empty token sequence");
  Matrix m(seq.ids.size(), table.dim());
  for (std::size_t j = 0; j < seq.ids.size(); ++j) {
    const auto id = seq.ids[j];
    if (id >= table.size()) {
      throw std::out_of_range("token id " + std::to_string(id) + " outside embedding table of size " +
                              std::to_string(table.size()));
    }
    m.row(static_cast<Eigen::Index>(j)) = table.row(id);
  }
  return SoftPrompt(std::move(m));
}

SoftPrompt random_prompt(std::size_t length, std::size_t dim, std::uint64_t seed) {
  if (length < 1 || dim < 1) throw std::invalid_argument("random prompt needs L, D >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(length, dim);
  for (Eigen::Index j = 0; j < m.rows(); ++j) {
    for (Eigen::Index d = 0; d < m.cols(); ++d) m(j, d) = normal(rng);
  }
  return SoftPrompt(std::move(m));
}

std::string detokenize(const TokenSeq& seq, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t j = 0; j < seq.ids.size(); ++j) {
    if (j) out.push_back(' ');
    out += vocab.surface(seq.ids[j]);
  }
  return out;
}

FilteredReport filter_report(std::string_view text, const Lexicon& lex) {
  FilteredReport out;
  std::size_t prev = 0;
  for (const auto& m : match_terms(text, lex)) {
    if (m.kind != ListKind::blacklist) continue;
    out.text.append(text.substr(prev, m.begin - prev));
    out.text.append(kDeidPlaceholder);
    out.removals.push_back(Removal{m.begin, m.end, m.surface, m.category});
    prev = m.end;
  }
  out.text.append(text.substr(prev));
  return out;
}

}  // namespace updp
