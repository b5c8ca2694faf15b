#include <doctest.h>

#include <map>

#include "updp/lexicon.hpp"
#include "updp/synth.hpp"
#include "updp/textkit.hpp"

using namespace updp;

TEST_CASE("same seed, same corpus") {
  SynthConfig sc;
  sc.records = 30;
  sc.patients = 7;
  const auto a = synth_corpus(sc);
  const auto b = synth_corpus(sc);
  CHECK(a.records == b.records);
  CHECK(a.truth == b.truth);
  sc.seed = 1;
  CHECK(synth_corpus(sc).records != a.records);
}

TEST_CASE("records are spread evenly over patients") {
  SynthConfig sc;
  sc.records = 103;
  sc.patients = 10;
  std::map<std::string, std::size_t> per;
  for (const auto& r : synth_corpus(sc).records) ++per[r.patient_id];
  CHECK(per.size() == 10);
  for (const auto& [p, n] : per) CHECK((n == 10 || n == 11));
}

TEST_CASE("ground truth spans are exactly the lexicon matches") {
  SynthConfig sc;
  sc.records = 60;
  sc.patients = 12;
  const auto c = synth_corpus(sc);
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    const auto matches = match_terms(c.records[i].report, c.lexicon);
    REQUIRE(matches.size() == c.truth[i].size());
    for (std::size_t k = 0; k < matches.size(); ++k) {
      CHECK(matches[k].begin == c.truth[i][k].begin);
      CHECK(matches[k].end == c.truth[i][k].end);
      CHECK(matches[k].surface == c.truth[i][k].surface);
      CHECK(matches[k].kind == c.truth[i][k].kind);
    }
  }
}

TEST_CASE("watermark codes are distinct per patient") {
  CHECK(watermark_levels(50, 3) == 4);
  CHECK(watermark_levels(50, 2) == 8);
  CHECK(watermark_levels(1, 3) == 1);
  SynthConfig sc;
  sc.records = 40;
  sc.patients = 40;
  sc.noise = 0.0;
  const auto c = synth_corpus(sc);
  std::map<std::vector<double>, std::string> seen;
  for (const auto& r : c.records) {
    std::vector<double> band;
    for (std::size_t k = 0; k < sc.watermark_regions; ++k) {
      band.push_back(r.image.at(0, k * sc.width / sc.watermark_regions + 1));
    }
    CHECK(seen.emplace(band, r.patient_id).second);
  }
}

TEST_CASE("config validation") {
  SynthConfig sc;
  sc.patients = 0;
  CHECK_THROWS_AS(synth_corpus(sc), std::invalid_argument);
  sc.patients = 3;
  sc.height = 8;
  CHECK_THROWS_AS(synth_corpus(sc), std::invalid_argument);
}
