#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "updp/lexicon.hpp"
#include "updp/linalg.hpp"
#include "updp/rng.hpp"
#include "updp/textkit.hpp"

namespace updp {

/// Cosine scores against every vocabulary entry. An excluded entry stands
/// for a score of minus infinity; its `scores` value is meaningless.
struct ScoreRow {
  std::vector<double> scores;
  std::vector<std::uint8_t> excluded;

  std::size_t size() const { return scores.size(); }
};

struct Candidate {
  TokenId id = 0;
  double score = 0.0;   ///< raw cosine s
  double biased = 0.0;  ///< s + lambda * [id in P]

  bool operator==(const Candidate&) const = default;
};

/// Descending by raw score, ties by ascending id.
using CandidateSet = std::vector<Candidate>;

enum class SelectionMode { greedy, softmax };

struct SelectionPolicy {
  SelectionMode mode = SelectionMode::greedy;
  double temperature = 1.0;

  void validate() const;
};

/// score[t] = cos(e / |e|, E_t / |E_t|) for every row t of the table.
ScoreRow score_row(const Eigen::Ref<const Vector>& embedding, const EmbeddingTable& table);

/// Marks every id of `forbidden` as excluded.
ScoreRow apply_blacklist(ScoreRow row, const IdSet& forbidden);

/// The min(K, available) best non-excluded entries. `position` only labels
/// the VocabularyExhaustedError raised when nothing survives.
CandidateSet top_k(const ScoreRow& row, std::size_t k, std::size_t position = 0);

/// biased = score + lambda for members of `preferred`; membership and order unchanged.
CandidateSet bias_whitelist(CandidateSet candidates, const IdSet& preferred, double lambda);

/// Greedy: argmax of the biased score, ties by ascending id; `rng` is untouched.
/// Softmax: draws with probability proportional to exp(biased / temperature).
TokenId select_token(const CandidateSet& candidates, const SelectionPolicy& policy, Rng& rng);

struct ProjectionParams {
  IdSet forbidden;
  IdSet preferred;
  std::size_t top_k = 20;
  double lambda = 0.05;
  SelectionPolicy policy;
};

/// Per-position record of a projection, for verbose audits.
struct PositionDump {
  std::size_t position = 0;
  CandidateSet candidates;
  TokenId chosen = 0;
};

/// score_row -> apply_blacklist -> top_k -> bias_whitelist -> select_token at every position.
TokenSeq project_prompt(const SoftPrompt& prompt, const EmbeddingTable& table, const ProjectionParams& params,
                        Rng& rng, std::vector<PositionDump>* dump = nullptr);

}  // namespace updp
