#include <doctest.h>

#include <random>

#include "updp/encoders.hpp"
#include "updp/errors.hpp"
#include "updp/optimizer.hpp"

using namespace updp;

namespace {

Vector unit_target(std::uint64_t seed, std::size_t dim) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Vector f(static_cast<Eigen::Index>(dim));
  for (auto& v : f) v = n(rng);
  return f.normalized();
}

}  // namespace

TEST_CASE("zero steps and zero rate leave the prompt untouched") {
  const ReferenceEncoder enc(16, 2, 5);
  const SoftPrompt h(random_prompt(8, 16, 1).values);
  const Vector f = unit_target(2, 16);

  const auto r0 = optimize_prompt(h, f, enc, 0.05, 0);
  CHECK(r0.prompt.values == h.values);
  CHECK(r0.trace.losses == std::vector<double>{alignment_loss(h, f, enc)});

  const auto r1 = optimize_prompt(h, f, enc, 0.0, 10);
  CHECK(r1.prompt.values == h.values);
  REQUIRE(r1.trace.losses.size() == 11);
  for (double l : r1.trace.losses) CHECK(l == r1.trace.losses.front());
}

TEST_CASE("descent lowers the loss and the trace replays exactly") {
  const ReferenceEncoder enc(16, 2, 7);
  const SoftPrompt h(random_prompt(8, 16, 3).values);
  const Vector f = unit_target(4, 16);
  const auto res = optimize_prompt(h, f, enc, 0.05, 50);
  CHECK(res.trace.steps == 50);
  CHECK(res.trace.learning_rate == 0.05);
  CHECK(res.trace.final_loss() < res.trace.initial_loss());

  // independent loop
  Matrix cur = h.values;
  for (std::size_t k = 0; k <= 50; ++k) {
    CHECK(std::abs(alignment_loss(SoftPrompt(cur), f, enc) - res.trace.losses[k]) < 1e-12);
    if (k < 50) cur -= 0.05 * alignment_grad(SoftPrompt(cur), f, enc);
  }
  CHECK(cur == res.prompt.values);
}

TEST_CASE("non-finite input aborts with the step index") {
  const ReferenceEncoder enc(4, 2, 7);
  const SoftPrompt h(random_prompt(2, 4, 3).values);
  const Vector f = unit_target(4, 4);
  CHECK_THROWS_AS(optimize_prompt(h, f, enc, std::numeric_limits<double>::infinity(), 3), std::invalid_argument);
  // a finite but absurd rate overflows on the first step
  try {
    optimize_prompt(h, f, enc, 1e308, 3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
  // a non-finite prompt cannot even be built
  Matrix bad = h.values;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(SoftPrompt{bad}, std::invalid_argument);
}

TEST_CASE("refine cycle") {
  const ReferenceEncoder enc(8, 2, 7);
  const auto table = EmbeddingTable::generate(40, 8, 3);
  const SoftPrompt h(random_prompt(6, 8, 3).values);
  const Vector f = unit_target(9, 8);
  ProjectionParams params;
  params.forbidden = {0, 1, 2, 3, 10, 11};
  params.preferred = {20, 21};
  params.top_k = 5;

  // one round is optimize then project
  Rng a(1), b(1);
  const auto one = refine_cycle(h, f, enc, table, params, 0.05, 20, 1, a);
  const auto opt = optimize_prompt(h, f, enc, 0.05, 20);
  CHECK(one.tokens == project_prompt(opt.prompt, table, params, b));
  CHECK(one.traces.size() == 1);

  // eta = 0: a fixed point after the first projection
  Rng c(1);
  const auto fixed = refine_cycle(h, f, enc, table, params, 0.0, 5, 3, c);
  REQUIRE(fixed.round_tokens.size() == 3);
  CHECK(fixed.round_tokens[1] == fixed.round_tokens[0]);
  CHECK(fixed.round_tokens[2] == fixed.round_tokens[0]);

  // repeated runs agree
  params.policy.mode = SelectionMode::softmax;
  Rng d(5), e(5);
  CHECK(refine_cycle(h, f, enc, table, params, 0.05, 10, 3, d).round_tokens ==
        refine_cycle(h, f, enc, table, params, 0.05, 10, 3, e).round_tokens);
}
