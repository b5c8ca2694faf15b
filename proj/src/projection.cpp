#include "updp/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "updp/errors.hpp"

namespace updp {

void SelectionPolicy::validate() const {
  if (!(std::isfinite(temperature) && temperature > 0.0)) {
    throw std::invalid_argument("temperature must be finite and positive");
  }
}

ScoreRow score_row(const Eigen::Ref<const Vector>& embedding, const EmbeddingTable& table) {
  if (static_cast<std::size_t>(embedding.size()) != table.dim()) {
    throw std::invalid_argument("embedding dimension does not match the table");
  }
  const double n = embedding.norm();
  if (!(n > 0.0)) throw DegenerateInputError("score_row: zero-norm prompt embedding");
  if (table.has_zero_row()) throw DegenerateInputError("score_row: embedding table has a zero row");
  const Vector unit = embedding / n;
  const Vector dots = table.unit_rows() * unit;
  ScoreRow row;
  row.scores.resize(table.size());
  row.excluded.assign(table.size(), 0);
  for (std::size_t t = 0; t < table.size(); ++t) {
    row.scores[t] = std::clamp(dots(static_cast<Eigen::Index>(t)), -1.0, 1.0);
  }
  return row;
}

ScoreRow apply_blacklist(ScoreRow row, const IdSet& forbidden) {
  for (const auto id : forbidden) {
    if (id >= row.size()) throw std::out_of_range("blacklisted id " + std::to_string(id) + " outside vocabulary");
    row.excluded[id] = 1;
  }
  return row;
}

CandidateSet top_k(const ScoreRow& row, std::size_t k, std::size_t position) {
  if (k < 1) throw std::invalid_argument("top-K needs K >= 1");
  std::vector<TokenId> ids;
  ids.reserve(row.size());
  for (std::size_t t = 0; t < row.size(); ++t) {
    if (!row.excluded[t]) ids.push_back(static_cast<TokenId>(t));
  }
  if (ids.empty()) throw VocabularyExhaustedError(position);
  const auto better = [&row](TokenId a, TokenId b) {
    return row.scores[a] != row.scores[b] ? row.scores[a] > row.scores[b] : a < b;
  };
  const std::size_t keep = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(), better);
  CandidateSet out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back({ids[i], row.scores[ids[i]], row.scores[ids[i]]});
  return out;
}

CandidateSet bias_whitelist(CandidateSet candidates, const IdSet& preferred, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
  for (auto& c : candidates) c.biased = c.score + (preferred.contains(c.id) ? lambda : 0.0);
  return candidates;
}

TokenId select_token(const CandidateSet& candidates, const SelectionPolicy& policy, Rng& rng) {
  if (candidates.empty()) throw std::invalid_argument("select_token needs at least one candidate");
  if (policy.mode == SelectionMode::greedy) {
    const auto best = std::min_element(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      return a.biased != b.biased ? a.biased > b.biased : a.id < b.id;
    });
    return best->id;
  }
  policy.validate();
  double top = candidates.front().biased;
  for (const auto& c : candidates) top = std::max(top, c.biased);
  std::vector<double> weights;
  weights.reserve(candidates.size());
  for (const auto& c : candidates) weights.push_back(std::exp((c.biased - top) / policy.temperature));
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  return candidates[pick(rng)].id;
}

TokenSeq project_prompt(const SoftPrompt& prompt, const EmbeddingTable& table, const ProjectionParams& params,
                        Rng& rng, std::vector<PositionDump>* dump) {
  params.policy.validate();
  TokenSeq out;
  out.ids.reserve(prompt.length());
  for (std::size_t j = 0; j < prompt.length(); ++j) {
    auto row = apply_blacklist(score_row(prompt.values.row(static_cast<Eigen::Index>(j)).transpose(), table),
                               params.forbidden);
    auto cands = bias_whitelist(top_k(row, params.top_k, j), params.preferred, params.lambda);
    const TokenId chosen = select_token(cands, params.policy, rng);
    out.ids.push_back(chosen);
    if (dump) dump->push_back({j, std::move(cands), chosen});
  }
  return out;
}

}  // namespace updp
