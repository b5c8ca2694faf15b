#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "updp/vocabulary.hpp"

namespace updp {

enum class ListKind { blacklist, whitelist };

enum class Category {
  // blacklist
  patient_id,
  personnel,
  contact,
  location,
  date,
  demographic,
  institution,
  other,
  // whitelist
  modality,
  view,
  anatomy,
  tissue,
  descriptor,
};

std::string_view to_string(Category c);
std::string_view to_string(ListKind k);
std::optional<Category> parse_category(std::string_view name);
ListKind kind_of(Category c);

/// A canonical lexicon phrase: case-folded words joined by single spaces.
struct LexTerm {
  std::string surface;
  Category category = Category::other;

  bool operator==(const LexTerm&) const = default;
};

inline constexpr std::size_t kMaxPhraseWords = 8;

/// Immutable pair of phrase sets: the blacklist F and the whitelist P.
/// Construction canonicalizes and deduplicates (first occurrence wins) and
/// rejects any word shared between the two lists.
class Lexicon {
 public:
  Lexicon() = default;
  Lexicon(const std::vector<LexTerm>& blacklist, const std::vector<LexTerm>& whitelist);

  const std::vector<LexTerm>& terms(ListKind kind) const { return lists_[index(kind)]; }
  const std::vector<LexTerm>& blacklist() const { return terms(ListKind::blacklist); }
  const std::vector<LexTerm>& whitelist() const { return terms(ListKind::whitelist); }

  const LexTerm* find(ListKind kind, std::string_view surface) const;
  std::size_t longest_phrase(ListKind kind) const { return longest_[index(kind)]; }

 private:
  static std::size_t index(ListKind k) { return k == ListKind::blacklist ? 0 : 1; }

  std::array<std::vector<LexTerm>, 2> lists_;
  std::array<std::unordered_map<std::string, std::size_t>, 2> lookup_;
  std::array<std::size_t, 2> longest_{0, 0};
};

/// Parses one list. Accepts JSON (an array of {term, category} objects, or an
/// object holding such an array under "blacklist"/"whitelist") or the plain
/// format: one term per line, `#category: <name>` (or `#<name>:`) headers,
/// other `#` lines are comments.
std::vector<LexTerm> parse_lexicon_entries(std::string_view text, ListKind kind);

Lexicon load_lexicon(std::istream& blacklist_source, std::istream& whitelist_source);

/// Reads a single JSON file carrying both `blacklist` and `whitelist` arrays.
Lexicon load_lexicon_file(const std::filesystem::path& path);

/// Serializes to the combined JSON format.
std::string lexicon_to_json(const Lexicon& lex);

struct TermMatch {
  std::size_t begin = 0;  ///< byte offset, inclusive
  std::size_t end = 0;    ///< byte offset, exclusive
  std::string surface;
  ListKind kind = ListKind::blacklist;
  Category category = Category::other;

  bool operator==(const TermMatch&) const = default;
};

/// Case-insensitive, word-aligned phrase matching. Within each list the
/// longest match wins, then the leftmost. Output is sorted by offset.
std::vector<TermMatch> match_terms(std::string_view text, const Lexicon& lex);

using IdSet = std::set<TokenId>;

struct TokenIdSets {
  IdSet forbidden;  ///< F_ids
  IdSet preferred;  ///< P_ids
  std::vector<std::string> missing_blacklist;  ///< lexicon words absent from the vocabulary
  std::vector<std::string> missing_whitelist;
};

/// Maps every word of every phrase onto vocabulary ids.
TokenIdSets token_id_sets(const Lexicon& lex, const Vocabulary& vocab);

}  // namespace updp
