#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "../oracles.hpp"
#include "updp/errors.hpp"
#include "updp/pipeline.hpp"
#include "updp/synth.hpp"

using namespace updp;

namespace {

struct Fixture {
  std::vector<Record> records;
  Lexicon lexicon;
  Vocabulary vocab;
  EmbeddingTable table;
  ReferenceEncoder encoder;
  ToyGenerator generator;

  Fixture(std::size_t n, Lexicon lex, double alpha = 0.0)
      : records(make_records(n)),
        lexicon(std::move(lex)),
        vocab(build_vocab(reports(records), 1)),
        table(EmbeddingTable::generate(vocab.size(), 16, 1)),
        encoder(16, 8, 2),
        generator(16, 32, 32, alpha, 3) {}

  static std::vector<Record> make_records(std::size_t n) {
    SynthConfig sc;
    sc.records = n;
    sc.patients = 5;
    sc.seed = 1;
    return synth_corpus(sc).records;
  }
  static std::vector<std::string> reports(const std::vector<Record>& rs) {
    std::vector<std::string> out;
    for (const auto& r : rs) out.push_back(r.report);
    return out;
  }
  PipelineDeps deps() const { return {lexicon, vocab, table, encoder, generator}; }
};

}  // namespace

TEST_CASE("generator determinism and blending") {
  const auto table = EmbeddingTable::generate(30, 6, 1);
  const ToyGenerator gen(6, 16, 12, 0.0, 4);
  const TokenSeq y{{5, 9, 9, 20}};
  CHECK(generate_image(y, nullptr, gen, table) == generate_image(y, nullptr, gen, table));
  std::mt19937_64 rng(3);
  const auto src = oracle::random_image(16, 12, rng);
  CHECK(generate_image(y, &src, gen, table) == generate_image(y, nullptr, gen, table));

  const auto blend = gen.with_alpha(0.4);
  const auto out = generate_image(y, &src, blend, table);
  const Vector u = (table.matrix().row(5) + 2 * table.matrix().row(9) + table.matrix().row(20)).transpose() / 4.0;
  for (std::size_t r = 0; r < 16; ++r) {
    for (std::size_t c = 0; c < 12; ++c) {
      const std::size_t i = r * 12 + c;
      double pre = gen.bias()[i];
      for (int d = 0; d < 6; ++d) pre += gen.weights()(i, d) * u[d];
      double low = 0;
      for (std::size_t a = r / 4 * 4; a < r / 4 * 4 + 4; ++a)
        for (std::size_t b = c / 4 * 4; b < c / 4 * 4 + 4; ++b) low += src.at(a, b) / 16.0;
      const double expect = 0.6 / (1 + std::exp(-pre)) + 0.4 * low;
      CHECK(std::abs(out.at(r, c) - expect) < 1e-12);
    }
  }
}

TEST_CASE("context checks dimensions and reserves special tokens") {
  Fixture fx(5, Lexicon{});
  PipelineConfig cfg;
  const DeidContext ctx(fx.deps(), cfg);
  for (TokenId id = 0; id < kReservedCount; ++id) CHECK(ctx.projection().forbidden.count(id) == 1);
  cfg.alpha = 0.5;
  CHECK_THROWS_AS(DeidContext(fx.deps(), cfg), std::invalid_argument);
  cfg.alpha = 0.0;
  cfg.tau = 0.0;
  CHECK_THROWS_AS(DeidContext(fx.deps(), cfg), std::invalid_argument);
}

TEST_CASE("no optimization and no lexicon reproduces the report tokens") {
  Fixture fx(3, Lexicon{});
  PipelineConfig cfg;
  cfg.T = 0;
  cfg.lambda = 0.0;
  const DeidContext ctx(fx.deps(), cfg);
  Rng rng(0);
  const auto out = deid_record(fx.records[0], ctx, rng);
  CHECK(out.prompt_tokens == tokenize(fx.records[0].report, fx.vocab, cfg.L_max));
  CHECK(out.report == fx.records[0].report);
  CHECK(out.audit.replacements.empty());
}

TEST_CASE("blacklisted report words are replaced and audited") {
  Fixture fx(3, Lexicon{});
  const std::string name = fx.records[0].report.substr(9, fx.records[0].report.find('.') - 9);
  const Lexicon lex({{name, Category::patient_id}}, {});
  Fixture fx2(3, lex);
  PipelineConfig cfg;
  cfg.T = 0;
  const DeidContext ctx(fx2.deps(), cfg);
  Rng rng(0);
  const auto out = deid_record(fx2.records[0], ctx, rng);
  const auto seq = tokenize(fx2.records[0].report, fx2.vocab, cfg.L_max);
  REQUIRE(out.audit.replacements.size() == 2);  // first and last name
  for (const auto& rep : out.audit.replacements) {
    CHECK(ctx.ids().forbidden.count(rep.original) == 1);
    CHECK(ctx.ids().forbidden.count(rep.replacement) == 0);
    CHECK(out.prompt_tokens.ids[rep.position] == rep.replacement);
  }
  CHECK(out.report.find("[DEID]") != std::string::npos);
  CHECK(out.audit.removals.size() == 1);
  for (std::size_t j = 0; j < seq.size(); ++j) CHECK(ctx.ids().forbidden.count(out.prompt_tokens.ids[j]) == 0);

  cfg.pair_report = PairReport::original;
  const DeidContext orig(fx2.deps(), cfg);
  Rng rng2(0);
  CHECK(deid_record(fx2.records[0], orig, rng2).report == fx2.records[0].report);
}

TEST_CASE("random init and verbose audit") {
  Fixture fx(2, Lexicon{});
  PipelineConfig cfg;
  cfg.init = PromptInit::random;
  cfg.T = 5;
  const DeidContext ctx(fx.deps(), cfg);
  Rng a(4), b(4);
  const auto x = deid_record(fx.records[1], ctx, a, true);
  const auto y = deid_record(fx.records[1], ctx, b, true);
  CHECK(x.prompt_tokens == y.prompt_tokens);
  CHECK(x.audit.candidates.size() == x.prompt_tokens.size());
  CHECK(x.audit.rounds.size() == 1);
}

TEST_CASE("dataset run: order, failures, schedule independence") {
  SynthConfig sc;
  sc.records = 12;
  sc.patients = 4;
  const auto corpus = synth_corpus(sc);
  Fixture fx(12, corpus.lexicon);
  PipelineConfig cfg;
  cfg.mode = SelectionMode::softmax;
  cfg.seed = 9;
  const DeidContext ctx(fx.deps(), cfg);
  CHECK(deid_dataset({}, ctx, 4).records.empty());
  const auto one = deid_dataset(fx.records, ctx, 1);
  const auto many = deid_dataset(fx.records, ctx, 5);
  REQUIRE(one.records.size() == 12);
  CHECK(one.failures.empty());
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(one.records[i].id == fx.records[i].id);
    CHECK(serialize_deid_record(one.records[i], fx.vocab, "") == serialize_deid_record(many.records[i], fx.vocab, ""));
    CHECK(match_terms(one.records[i].report, corpus.lexicon).size() ==
          match_terms(one.records[i].report, Lexicon({}, corpus.lexicon.whitelist())).size());
  }

  auto dup = fx.records;
  dup[1].id = dup[0].id;
  CHECK_THROWS_AS(deid_dataset(dup, ctx, 1), std::invalid_argument);
}

TEST_CASE("a fully blacklisted vocabulary fails every record without aborting") {
  Fixture fx(3, Lexicon{});
  std::vector<LexTerm> all;
  for (TokenId id = kReservedCount; id < fx.vocab.size(); ++id) all.push_back({fx.vocab.surface(id), Category::other});
  Fixture fx2(3, Lexicon(all, {}));
  const DeidContext ctx(fx2.deps(), PipelineConfig{});
  const auto res = deid_dataset(fx2.records, ctx, 2);
  CHECK(res.records.empty());
  REQUIRE(res.failures.size() == 3);
  CHECK(res.failures[1].id == fx2.records[1].id);
  CHECK(res.failures[1].message.find(fx2.records[1].id) != std::string::npos);
  CHECK(res.failures[1].message.find("exhausted") != std::string::npos);
}

TEST_CASE("dataset files round trip") {
  oracle::TempDir dir;
  Fixture fx(10, Lexicon{});
  write_dataset(fx.records, dir / "inline.jsonl", ImageStorage::inline_pixels);
  CHECK(read_dataset(dir / "inline.jsonl") == fx.records);

  write_dataset(fx.records, dir / "pgm.jsonl", ImageStorage::pgm_files);
  const auto back = read_dataset(dir / "pgm.jsonl");
  REQUIRE(back.size() == fx.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    const auto& a = back[i].image.pixels();
    const auto& b = fx.records[i].image.pixels();
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k] * 255.0 == std::round(a[k] * 255.0));
      CHECK(std::abs(a[k] - std::round(b[k] * 255.0) / 255.0) < 1e-15);
    }
  }
}

TEST_CASE("dataset file errors") {
  oracle::TempDir dir;
  {
    std::ofstream out(dir / "bad.jsonl");
    out << R"({"id":"a","patient_id":"p","report":"x","image":{"h":8,"w":8,"pixels":[)";
    for (int i = 0; i < 64; ++i) out << (i ? "," : "") << (i == 5 ? "1.1" : "0.5");
    out << "]}}\n";
  }
  try {
    read_dataset(dir / "bad.jsonl");
    FAIL("expected an error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }
  {
    std::ofstream out(dir / "broken.jsonl");
    out << "\n{\"id\": \n";
  }
  try {
    read_dataset(dir / "broken.jsonl");
    FAIL("expected an error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  {
    std::ofstream out(dir / "missing.jsonl");
    out << R"({"id":"a","patient_id":"p","report":"x","image":{"path":"nope.pgm"}})" << '\n';
  }
  CHECK_THROWS_AS(read_dataset(dir / "missing.jsonl"), ParseError);
  CHECK_THROWS_AS(read_dataset(dir / "absent.jsonl"), Error);
}
