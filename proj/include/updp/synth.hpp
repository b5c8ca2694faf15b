#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "updp/lexicon.hpp"
#include "updp/pipeline.hpp"

namespace updp {

/// Desk-scale chest-film cohort. Every image carries an identity watermark on
/// top of a shared anatomy pattern and per-study pathology findings: the top
/// band is cut into `watermark_regions` fixed cells and each cell gets a
/// patient-specific constant intensity offset (the digits of the patient's
/// code). Reports are templated from the findings and carry injected PHI.
struct SynthConfig {
  std::size_t records = 200;
  std::size_t patients = 20;
  std::size_t height = 32;
  std::size_t width = 32;
  std::uint64_t seed = 0;
  double watermark_max = 0.85;  ///< offsets are spread evenly over [0, watermark_max]
  std::size_t watermark_regions = 3;
  double noise = 0.02;          ///< pixel noise standard deviation
  double finding_rate = 0.3;    ///< probability of each pathology finding

  void validate() const;
};

/// A phrase the generator injected into a report, with its byte span.
struct TruthSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string surface;  ///< canonical lexicon surface
  ListKind kind = ListKind::blacklist;
  Category category = Category::other;

  bool operator==(const TruthSpan&) const = default;
};

struct SynthCorpus {
  std::vector<Record> records;
  std::vector<std::vector<TruthSpan>> truth;  ///< per record, sorted by offset
  Lexicon lexicon;                           ///< every injected PHI phrase + the pathology whitelist
};

/// Record i belongs to patient i mod patients. Deterministic in the config.
SynthCorpus synth_corpus(const SynthConfig& cfg);

/// Rows covered by the watermark band (the top quarter).
std::size_t watermark_rows(std::size_t height);
/// Offset levels per region: the smallest b with b^regions >= patients.
std::size_t watermark_levels(std::size_t patients, std::size_t regions);

}  // namespace updp
