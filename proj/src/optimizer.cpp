#include "updp/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "updp/errors.hpp"

namespace updp {

OptimizeResult optimize_prompt(const SoftPrompt& initial, const FeatureVec& image_feature, const Encoder& enc,
                               double eta, std::size_t steps) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("learning rate must be finite and >= 0");
  OptimizeResult result{initial, OptTrace{{}, steps, eta}};
  result.trace.losses.reserve(steps + 1);
  Matrix& h = result.prompt.values;

  double loss = alignment_loss(result.prompt, image_feature, enc);
  if (!std::isfinite(loss)) throw NonFiniteError(0, "loss");
  result.trace.losses.push_back(loss);
  for (std::size_t step = 1; step <= steps; ++step) {
    try {
      const Matrix grad = alignment_grad(result.prompt, image_feature, enc);
      if (!grad.allFinite()) throw NonFiniteError(step, "gradient");
      h -= eta * grad;
      if (!h.allFinite()) throw NonFiniteError(step, "prompt");
      loss = alignment_loss(result.prompt, image_feature, enc);
    } catch (const DegenerateInputError& e) {
      throw DegenerateInputError(std::string(e.what()) + " at step " + std::to_string(step));
    }
    if (!std::isfinite(loss)) throw NonFiniteError(step, "loss");
    result.trace.losses.push_back(loss);
  }
  return result;
}

RefineResult refine_cycle(const SoftPrompt& initial, const FeatureVec& image_feature, const Encoder& enc,
                          const EmbeddingTable& table, const ProjectionParams& projection, double eta,
                          std::size_t steps, std::size_t rounds, Rng& rng, bool dump_candidates) {
  if (rounds < 1) throw std::invalid_argument("refine_cycle needs at least one round");
  RefineResult result;
  SoftPrompt current = initial;
  for (std::size_t r = 0; r < rounds; ++r) {
    auto optimized = optimize_prompt(current, image_feature, enc, eta, steps);
    result.traces.push_back(std::move(optimized.trace));
    const bool last = r + 1 == rounds;
    result.tokens = project_prompt(optimized.prompt, table, projection, rng,
                                   dump_candidates && last ? &result.last_dump : nullptr);
    result.round_tokens.push_back(result.tokens);
    if (!last) current = embed(result.tokens, table);
  }
  return result;
}

}  // namespace updp
