#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace updp {

/// One word of a text: a maximal run of Unicode letters/digits.
/// Offsets are byte offsets into the original (unfolded) text.
struct WordToken {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string folded;  ///< case-folded UTF-8 surface
};

/// Splits on whitespace and punctuation; every other code point that is not a
/// letter or digit also separates words. Invalid UTF-8 bytes act as separators.
std::vector<WordToken> split_words(std::string_view text);

/// Lowercases every code point (simple Unicode case mapping).
std::string fold_case(std::string_view text);

/// Folded words joined by single spaces, i.e. the canonical phrase form.
std::string canonical_phrase(std::string_view text);

}  // namespace updp
