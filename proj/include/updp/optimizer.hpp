#pragma once

#include <cstddef>
#include <vector>

#include "updp/encoders.hpp"
#include "updp/projection.hpp"
#include "updp/textkit.hpp"

namespace updp {

/// losses[k] is the alignment loss after k descent steps; size steps + 1.
struct OptTrace {
  std::vector<double> losses;
  std::size_t steps = 0;
  double learning_rate = 0.0;

  double initial_loss() const { return losses.front(); }
  double final_loss() const { return losses.back(); }
};

struct OptimizeResult {
  SoftPrompt prompt;
  OptTrace trace;
};

/// Exactly `steps` fixed-step full-gradient updates H <- H - eta * grad.
/// Throws NonFiniteError naming the step if a loss or gradient stops being finite.
OptimizeResult optimize_prompt(const SoftPrompt& initial, const FeatureVec& image_feature, const Encoder& enc,
                               double eta, std::size_t steps);

struct RefineResult {
  TokenSeq tokens;                         ///< tokens of the final round
  std::vector<OptTrace> traces;            ///< one per round
  std::vector<TokenSeq> round_tokens;      ///< projected tokens of every round
  std::vector<PositionDump> last_dump;     ///< filled only when requested
};

/// `rounds` repetitions of optimize -> project -> embed; each round starts
/// from the embedding of the previous round's tokens.
RefineResult refine_cycle(const SoftPrompt& initial, const FeatureVec& image_feature, const Encoder& enc,
                          const EmbeddingTable& table, const ProjectionParams& projection, double eta,
                          std::size_t steps, std::size_t rounds, Rng& rng, bool dump_candidates = false);

}  // namespace updp
