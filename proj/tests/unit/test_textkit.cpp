#include <doctest.h>

#include <map>
#include <random>
#include <sstream>

#include "../oracles.hpp"
#include "updp/textkit.hpp"
#include "updp/words.hpp"

using namespace updp;

TEST_CASE("vocabulary: reserved first, then sorted words") {
  const auto v = build_vocab({"a b", "b c"}, 1);
  CHECK(v.surfaces() == std::vector<std::string>{"[PAD]", "[UNK]", "[BOS]", "[EOS]", "a", "b", "c"});
  const auto v2 = build_vocab({"a b", "b c"}, 2);
  CHECK(v2.surfaces() == std::vector<std::string>{"[PAD]", "[UNK]", "[BOS]", "[EOS]", "b"});
  CHECK_THROWS_AS(build_vocab({}, 1), std::invalid_argument);
  CHECK_THROWS_AS(Vocabulary({"x", "x"}), std::invalid_argument);
}

TEST_CASE("vocabulary membership equals a recount") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> w(0, 40), n(0, 12);
  std::vector<std::string> corpus;
  for (int r = 0; r < 50; ++r) {
    std::string s;
    for (int k = n(rng); k > 0; --k) s += "Tok" + std::to_string(w(rng)) + (k % 4 == 0 ? ", " : " ");
    corpus.push_back(s);
  }
  for (std::size_t min_count : {1u, 3u, 7u}) {
    std::map<std::string, std::size_t> counts;
    for (const auto& s : corpus)
      for (const auto& word : oracle::ascii_words(s)) ++counts[word.folded];
    std::vector<std::string> expect{"[PAD]", "[UNK]", "[BOS]", "[EOS]"};
    for (const auto& [word, c] : counts)
      if (c >= min_count) expect.push_back(word);
    CHECK(build_vocab(corpus, min_count).surfaces() == expect);
  }
}

TEST_CASE("tokenize lowercases, maps unknowns, truncates") {
  const Vocabulary v({"are", "clear", "lungs"});
  CHECK(tokenize("Lungs are clear.", v, 64).ids == std::vector<TokenId>{*v.find("lungs"), *v.find("are"), *v.find("clear")});
  CHECK(tokenize("Lungs are opaque", v, 64).ids[2] == kUnkId);
  CHECK(tokenize("", v, 64).ids == std::vector<TokenId>{kUnkId});
  std::string longtext;
  for (int i = 0; i < 100; ++i) longtext += "lungs ";
  CHECK(tokenize(longtext, v, 16).size() == 16);
  CHECK(detokenize(tokenize("Lungs are clear.", v, 64), v) == "lungs are clear");
  CHECK(detokenize(TokenSeq{{kUnkId}}, v) == "[UNK]");
}

TEST_CASE("detokenize joins surfaces") {
  const Vocabulary v({"alpha", "beta", "gamma"});
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<TokenId> id(0, static_cast<TokenId>(v.size() - 1));
  TokenSeq seq;
  for (int i = 0; i < 30; ++i) seq.ids.push_back(id(rng));
  std::string expect;
  for (std::size_t i = 0; i < seq.size(); ++i) expect += (i ? " " : "") + v.surfaces()[seq.ids[i]];
  CHECK(detokenize(seq, v) == expect);
}

TEST_CASE("embedding table generation and file round trip") {
  const auto t = EmbeddingTable::generate(30, 6, 9);
  for (Eigen::Index r = 0; r < 30; ++r) CHECK(std::abs(t.matrix().row(r).norm() - 1.0) < 1e-12);
  CHECK(EmbeddingTable::generate(30, 6, 9).matrix() == t.matrix());
  CHECK(EmbeddingTable::generate(30, 6, 10).matrix() != t.matrix());

  std::stringstream io;
  t.write(io);
  const auto back = EmbeddingTable::read(io);
  CHECK(back.seed() == 9);
  CHECK((back.matrix() - t.matrix()).cwiseAbs().maxCoeff() < 1e-7);  // float32 payload

  std::stringstream header("30 6 9\n");
  CHECK(EmbeddingTable::read(header).matrix() == t.matrix());

  CHECK_THROWS_AS(EmbeddingTable(Matrix::Zero(10, 1)), std::invalid_argument);
  Matrix bad = Matrix::Ones(10, 3);
  bad(2, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(EmbeddingTable{bad}, std::invalid_argument);
}

TEST_CASE("embed gathers rows exactly") {
  const auto t = EmbeddingTable::generate(20, 5, 2);
  const auto one = embed(TokenSeq{{7}}, t);
  CHECK(one.values.rows() == 1);
  CHECK(one.values.row(0) == t.matrix().row(7));
  const auto rep = embed(TokenSeq{{4, 4}}, t);
  CHECK(rep.values.row(0) == rep.values.row(1));

  std::mt19937_64 rng(1);
  std::uniform_int_distribution<TokenId> id(0, 19);
  TokenSeq seq;
  for (int i = 0; i < 25; ++i) seq.ids.push_back(id(rng));
  const auto h = embed(seq, t);
  for (std::size_t j = 0; j < seq.size(); ++j)
    for (Eigen::Index d = 0; d < 5; ++d) CHECK(h.values(j, d) == t.matrix()(seq.ids[j], d));
  CHECK_THROWS(embed(TokenSeq{{20}}, t));
}

TEST_CASE("random prompt statistics and determinism") {
  CHECK(random_prompt(4, 3, 8).values == random_prompt(4, 3, 8).values);
  CHECK(random_prompt(4, 3, 8).values != random_prompt(4, 3, 9).values);
  const auto big = random_prompt(1000, 100, 17).values;
  const double mean = big.mean();
  const double var = (big.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("filter_report masks blacklist phrases only") {
  const Lexicon lex({{"john smith", Category::patient_id}}, {{"cardiomegaly", Category::descriptor}});
  const auto f = filter_report("Patient John Smith shows cardiomegaly", lex);
  CHECK(f.text == "Patient [DEID] shows cardiomegaly");
  REQUIRE(f.removals.size() == 1);
  CHECK(f.removals[0] == Removal{8, 18, "john smith", Category::patient_id});

  const auto none = filter_report("Lungs clear, cardiomegaly absent.", lex);
  CHECK(none.text == "Lungs clear, cardiomegaly absent.");
  CHECK(none.removals.empty());

  // re-filtering finds nothing new
  CHECK(match_terms(f.text, lex).size() == 1);
  CHECK(match_terms(f.text, lex)[0].kind == ListKind::whitelist);
}
