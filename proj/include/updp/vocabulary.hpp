#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace updp {

using TokenId = std::uint32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kBosId = 2;
inline constexpr TokenId kEosId = 3;
inline constexpr TokenId kReservedCount = 4;

/// Word vocabulary. Ids 0..3 are [PAD], [UNK], [BOS], [EOS]; the remaining
/// surfaces are unique lowercase words.
class Vocabulary {
 public:
  Vocabulary();

  /// Appends `words` after the reserved tokens. Throws std::invalid_argument
  /// on duplicates or empty surfaces.
  explicit Vocabulary(const std::vector<std::string>& words);

  std::size_t size() const { return surfaces_.size(); }
  const std::string& surface(TokenId id) const;
  std::optional<TokenId> find(std::string_view word) const;
  TokenId id_or_unk(std::string_view word) const;
  const std::vector<std::string>& surfaces() const { return surfaces_; }

  static bool is_reserved(TokenId id) { return id < kReservedCount; }

 private:
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, TokenId> index_;
};

struct TokenSeq {
  std::vector<TokenId> ids;

  std::size_t size() const { return ids.size(); }
  bool operator==(const TokenSeq&) const = default;
};

}  // namespace updp
