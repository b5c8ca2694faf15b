#include "updp/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "updp/errors.hpp"
#include "updp/words.hpp"

namespace updp {
namespace {

std::vector<std::string> words_of(std::string_view text, const char* which) {
  std::vector<std::string> out;
  for (auto& w : split_words(text)) out.push_back(std::move(w.folded));
  if (out.empty()) throw std::invalid_argument(std::string(which) + " has no words");
  return out;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

TextScore bleu_n(std::string_view candidate, std::string_view reference, int n) {
  if (n < 1 || n > 4) throw std::invalid_argument("BLEU order must be 1..4");
  const auto cand = words_of(candidate, "candidate");
  const auto ref = words_of(reference, "reference");
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    std::map<std::vector<std::string>, std::size_t> ref_counts;
    for (std::size_t i = 0; i + k <= ref.size(); ++i) ++ref_counts[{ref.begin() + i, ref.begin() + i + k}];
    std::map<std::vector<std::string>, std::size_t> cand_counts;
    std::size_t total = 0;
    for (std::size_t i = 0; i + k <= cand.size(); ++i) {
      ++cand_counts[{cand.begin() + i, cand.begin() + i + k}];
      ++total;
    }
    std::size_t clipped = 0;
    for (const auto& [gram, c] : cand_counts) {
      const auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) clipped += std::min(c, it->second);
    }
    const double num = clipped > 0 ? static_cast<double>(clipped) : kBleuEpsilon;
    const double den = total > 0 ? static_cast<double>(total) : 1.0;
    log_sum += std::log(num / den);
  }
  const double brevity =
      std::exp(std::min(0.0, 1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size())));
  const double value = std::exp(log_sum / n) * brevity * 100.0;
  return {"BLEU-" + std::to_string(n), std::clamp(value, 0.0, 100.0)};
}

TextScore rouge_l(std::string_view candidate, std::string_view reference, double beta) {
  const auto cand = words_of(candidate, "candidate");
  const auto ref = words_of(reference, "reference");
  const auto lcs = static_cast<double>(lcs_length(cand, ref));
  if (lcs == 0.0) return {"ROUGE-L", 0.0};
  const double p = lcs / static_cast<double>(cand.size());
  const double r = lcs / static_cast<double>(ref.size());
  const double b2 = beta * beta;
  return {"ROUGE-L", std::clamp((1.0 + b2) * p * r / (r + b2 * p) * 100.0, 0.0, 100.0)};
}

std::string simple_stem(std::string_view word) {
  static constexpr std::string_view kSuffixes[] = {"ingly", "edly", "ing", "ies", "es", "ed", "ly", "s"};
  for (const auto suffix : kSuffixes) {
    if (word.size() >= suffix.size() + 3 && word.ends_with(suffix)) {
      return std::string(word.substr(0, word.size() - suffix.size()));
    }
  }
  return std::string(word);
}

TextScore meteor_simplified(std::string_view candidate, std::string_view reference) {
  const auto cand = words_of(candidate, "candidate");
  const auto ref = words_of(reference, "reference");
  // align[i] = reference index matched to candidate word i.
  std::vector<std::ptrdiff_t> align(cand.size(), -1);
  std::vector<char> ref_used(ref.size(), 0);
  const auto stage = [&](auto&& key) {
    for (std::size_t i = 0; i < cand.size(); ++i) {
      if (align[i] >= 0) continue;
      const auto ck = key(cand[i]);
      for (std::size_t j = 0; j < ref.size(); ++j) {
        if (!ref_used[j] && key(ref[j]) == ck) {
          align[i] = static_cast<std::ptrdiff_t>(j);
          ref_used[j] = 1;
          break;
        }
      }
    }
  };
  stage([](const std::string& w) { return w; });
  stage([](const std::string& w) { return simple_stem(w); });

  std::size_t matches = 0;
  std::size_t chunks = 0;
  std::ptrdiff_t prev_ref = -2;
  bool prev_matched = false;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (align[i] < 0) {
      prev_matched = false;
      continue;
    }
    ++matches;
    if (!prev_matched || align[i] != prev_ref + 1) ++chunks;
    prev_ref = align[i];
    prev_matched = true;
  }
  if (matches == 0) return {"METEOR", 0.0};
  const double m = static_cast<double>(matches);
  const double p = m / static_cast<double>(cand.size());
  const double r = m / static_cast<double>(ref.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double penalty = 0.5 * std::pow(static_cast<double>(chunks) / m, 3.0);
  return {"METEOR", std::clamp(fmean * (1.0 - penalty) * 100.0, 0.0, 100.0)};
}

double corpus_mean(const std::vector<std::string>& candidates, const std::vector<std::string>& references,
                   TextScore (*metric)(std::string_view, std::string_view)) {
  if (candidates.size() != references.size()) throw std::invalid_argument("candidate/reference count mismatch");
  if (candidates.empty()) throw std::invalid_argument("no sentence pairs");
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) sum += metric(candidates[i], references[i]).value;
  return sum / static_cast<double>(candidates.size());
}

double ssim(const ImageGray& x, const ImageGray& y) {
  if (x.height() != y.height() || x.width() != y.width()) {
    throw std::invalid_argument("ssim: image dimensions differ");
  }
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  // Summed-area tables of x, y, x^2, y^2, xy with a zero border.
  const std::size_t stride = w + 1;
  std::vector<double> sx((h + 1) * stride, 0.0), sy(sx), sxx(sx), syy(sx), sxy(sx);
  for (std::size_t r = 0; r < h; ++r) {
    double rx = 0, ry = 0, rxx = 0, ryy = 0, rxy = 0;
    for (std::size_t c = 0; c < w; ++c) {
      const double a = x.at(r, c);
      const double b = y.at(r, c);
      rx += a;
      ry += b;
      rxx += a * a;
      ryy += b * b;
      rxy += a * b;
      const std::size_t at = (r + 1) * stride + c + 1;
      const std::size_t up = r * stride + c + 1;
      sx[at] = sx[up] + rx;
      sy[at] = sy[up] + ry;
      sxx[at] = sxx[up] + rxx;
      syy[at] = syy[up] + ryy;
      sxy[at] = sxy[up] + rxy;
    }
  }
  const auto box = [stride](const std::vector<double>& s, std::size_t r, std::size_t c) {
    const std::size_t r1 = r + kSsimWindow;
    const std::size_t c1 = c + kSsimWindow;
    return s[r1 * stride + c1] - s[r * stride + c1] - s[r1 * stride + c] + s[r * stride + c];
  };
  const double n = static_cast<double>(kSsimWindow * kSsimWindow);
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t r = 0; r + kSsimWindow <= h; ++r) {
    for (std::size_t c = 0; c + kSsimWindow <= w; ++c) {
      const double mx = box(sx, r, c) / n;
      const double my = box(sy, r, c) / n;
      const double vx = box(sxx, r, c) / n - mx * mx;
      const double vy = box(syy, r, c) / n - my * my;
      const double cxy = box(sxy, r, c) / n - mx * my;
      total += ((2.0 * mx * my + kSsimC1) * (2.0 * cxy + kSsimC2)) /
               ((mx * mx + my * my + kSsimC1) * (vx + vy + kSsimC2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows) * 100.0;
}

ProbeResult identity_probe(const std::vector<LabeledImage>& train, const std::vector<LabeledImage>& eval,
                           const Encoder& enc) {
  std::map<std::string, std::pair<Vector, std::size_t>> sums;
  for (const auto& s : train) {
    const FeatureVec f = enc.encode_image(s.image);
    auto [it, fresh] = sums.try_emplace(s.patient_id, Vector::Zero(f.size()), 0);
    it->second.first += f;
    ++it->second.second;
  }
  if (sums.size() < 2) throw std::invalid_argument("identity probe needs at least two training classes");
  std::vector<std::pair<std::string, Vector>> centroids;  // sorted by patient id
  for (auto& [id, acc] : sums) centroids.emplace_back(id, acc.first / static_cast<double>(acc.second));
  for (const auto& s : eval) {
    if (!sums.contains(s.patient_id)) {
      throw std::invalid_argument("evaluation patient '" + s.patient_id + "' has no training examples");
    }
  }

  ProbeResult result;
  result.n_classes = centroids.size();
  result.n_eval = eval.size();
  std::size_t correct = 0;
  for (const auto& s : eval) {
    const FeatureVec f = enc.encode_image(s.image);
    const std::string* best = nullptr;
    double best_sim = -2.0;
    for (const auto& [id, c] : centroids) {
      const double sim = cosine(f, c);
      if (sim > best_sim) {  // strict: earlier (smaller) id keeps ties
        best_sim = sim;
        best = &id;
      }
    }
    ++result.confusion[s.patient_id][*best];
    if (*best == s.patient_id) ++correct;
  }
  result.accuracy = eval.empty() ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(eval.size());
  return result;
}

}  // namespace updp
