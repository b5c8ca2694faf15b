#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "updp/encoders.hpp"

namespace updp {

/// A metric value as a percentage in [0, 100].
struct TextScore {
  std::string metric;
  double value = 0.0;
};

inline constexpr double kBleuEpsilon = 1e-9;
inline constexpr double kRougeBeta = 1.2;

/// Sentence-level BLEU-n: geometric mean of clipped k-gram precisions,
/// k = 1..n, zero counts replaced by epsilon, times the brevity penalty.
TextScore bleu_n(std::string_view candidate, std::string_view reference, int n);

/// ROUGE-L F-measure from the word-level longest common subsequence.
TextScore rouge_l(std::string_view candidate, std::string_view reference, double beta = kRougeBeta);

/// Unigram METEOR with exact and suffix-stripped stem matching only (no
/// synonym resource).
TextScore meteor_simplified(std::string_view candidate, std::string_view reference);

/// Suffix stripping used by meteor_simplified.
std::string simple_stem(std::string_view word);

/// Macro average of a sentence metric over paired lists of equal length.
double corpus_mean(const std::vector<std::string>& candidates, const std::vector<std::string>& references,
                   TextScore (*metric)(std::string_view, std::string_view));

inline constexpr std::size_t kSsimWindow = 8;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean SSIM over all 8x8 windows at stride 1 (uniform weights, population
/// moments), as a percentage.
double ssim(const ImageGray& x, const ImageGray& y);

struct LabeledImage {
  ImageGray image;
  std::string patient_id;
};

struct ProbeResult {
  double accuracy = 0.0;  ///< percent correct
  std::size_t n_classes = 0;
  std::size_t n_eval = 0;
  /// confusion[true][predicted]
  std::map<std::string, std::map<std::string, std::size_t>> confusion;
};

/// Nearest-centroid identity classifier on encoder features; cosine
/// similarity, ties broken by the lexicographically smaller patient id.
ProbeResult identity_probe(const std::vector<LabeledImage>& train, const std::vector<LabeledImage>& eval,
                           const Encoder& enc);

}  // namespace updp
