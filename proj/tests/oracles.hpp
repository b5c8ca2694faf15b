#pragma once

// Slow, independent re-implementations used as test oracles. None of these
// call into the library code they check.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "updp/encoders.hpp"
#include "updp/lexicon.hpp"
#include "updp/linalg.hpp"
#include "updp/vocabulary.hpp"

namespace oracle {

struct Word {
  std::size_t begin;
  std::size_t end;
  std::string folded;
};

// ASCII-only word splitter: runs of [A-Za-z0-9].
inline std::vector<Word> ascii_words(std::string_view text) {
  std::vector<Word> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isalnum(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    Word w{i, i, {}};
    while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) {
      w.folded += static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
      ++i;
    }
    w.end = i;
    out.push_back(std::move(w));
  }
  return out;
}

// Every (start, length) window is checked against every phrase; the winners
// are then picked longest first, leftmost among equals, skipping overlaps.
inline std::vector<updp::TermMatch> brute_force_matches(std::string_view text, const updp::Lexicon& lex) {
  const auto words = ascii_words(text);
  std::vector<updp::TermMatch> out;
  for (const auto kind : {updp::ListKind::blacklist, updp::ListKind::whitelist}) {
    struct Cand {
      std::size_t first, count;
      const updp::LexTerm* term;
    };
    std::vector<Cand> cands;
    for (std::size_t s = 0; s < words.size(); ++s) {
      std::string joined;
      for (std::size_t n = 1; s + n <= words.size(); ++n) {
        if (n > 1) joined += ' ';
        joined += words[s + n - 1].folded;
        for (const auto& t : lex.terms(kind)) {
          if (t.surface == joined) cands.push_back({s, n, &t});
        }
      }
    }
    std::vector<bool> used(words.size(), false);
    std::vector<Cand> chosen;
    while (true) {
      const Cand* best = nullptr;
      for (const auto& c : cands) {
        bool free = true;
        for (std::size_t k = c.first; k < c.first + c.count; ++k) free = free && !used[k];
        if (!free) continue;
        if (!best || c.count > best->count || (c.count == best->count && c.first < best->first)) best = &c;
      }
      if (!best) break;
      for (std::size_t k = best->first; k < best->first + best->count; ++k) used[k] = true;
      chosen.push_back(*best);
    }
    for (const auto& c : chosen) {
      out.push_back({words[c.first].begin, words[c.first + c.count - 1].end, c.term->surface, kind,
                     c.term->category});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.begin, a.kind) < std::tie(b.begin, b.kind);
  });
  return out;
}

inline double naive_cosine(const updp::Vector& a, const updp::Vector& b) {
  double dot = 0, na = 0, nb = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct Scored {
  updp::TokenId id;
  double s;
  double biased;
};

// Full score vector, full sort, truncate to K, add the bias, then scan for
// the greedy choice.
inline std::vector<Scored> full_sort_candidates(const updp::Vector& e, const updp::Matrix& table,
                                                const std::set<updp::TokenId>& forbidden,
                                                const std::set<updp::TokenId>& preferred, std::size_t k,
                                                double lambda) {
  std::vector<Scored> all;
  for (Eigen::Index t = 0; t < table.rows(); ++t) {
    const auto id = static_cast<updp::TokenId>(t);
    if (forbidden.count(id)) continue;
    all.push_back({id, naive_cosine(e, table.row(t).transpose()), 0.0});
  }
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
    if (a.s != b.s) return a.s > b.s;
    return a.id < b.id;
  });
  if (all.size() > k) all.resize(k);
  for (auto& c : all) c.biased = c.s + (preferred.count(c.id) ? lambda : 0.0);
  return all;
}

inline std::vector<updp::TokenId> full_sort_projection(const updp::Matrix& prompt, const updp::Matrix& table,
                                                       const std::set<updp::TokenId>& forbidden,
                                                       const std::set<updp::TokenId>& preferred, std::size_t k,
                                                       double lambda) {
  std::vector<updp::TokenId> out;
  for (Eigen::Index j = 0; j < prompt.rows(); ++j) {
    const auto cands = full_sort_candidates(prompt.row(j).transpose(), table, forbidden, preferred, k, lambda);
    const Scored* best = &cands.front();
    for (const auto& c : cands) {
      if (c.biased > best->biased || (c.biased == best->biased && c.id < best->id)) best = &c;
    }
    out.push_back(best->id);
  }
  return out;
}

// Windowed SSIM by direct summation over each 8x8 window.
inline double naive_ssim(const updp::ImageGray& x, const updp::ImageGray& y) {
  const std::size_t w = 8;
  const double c1 = 1e-4, c2 = 9e-4;
  const double n = static_cast<double>(w * w);
  double total = 0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + w <= x.height(); ++r) {
    for (std::size_t c = 0; c + w <= x.width(); ++c) {
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < w; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          mx += x.at(r + i, c + j);
          my += y.at(r + i, c + j);
        }
      mx /= n;
      my /= n;
      double vx = 0, vy = 0, cxy = 0;
      for (std::size_t i = 0; i < w; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          const double dx = x.at(r + i, c + j) - mx;
          const double dy = y.at(r + i, c + j) - my;
          vx += dx * dx;
          vy += dy * dy;
          cxy += dx * dy;
        }
      vx /= n;
      vy /= n;
      cxy /= n;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return 100.0 * total / static_cast<double>(count);
}

// Central differences of f over every entry of m.
template <class F>
updp::Matrix central_differences(const updp::Matrix& m, F f, double h) {
  updp::Matrix g(m.rows(), m.cols());
  updp::Matrix probe = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double up = f(probe);
      probe(i, j) = orig - h;
      const double down = f(probe);
      probe(i, j) = orig;
      g(i, j) = (up - down) / (2 * h);
    }
  }
  return g;
}

inline updp::ImageGray random_image(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> px(h * w);
  for (auto& v : px) v = u(rng);
  return updp::ImageGray(h, w, std::move(px));
}

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("updp_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace oracle
