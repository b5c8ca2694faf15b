#include <doctest.h>

#include "updp/config.hpp"
#include "updp/errors.hpp"

using namespace updp;

TEST_CASE("defaults") {
  const auto cfg = parse_run_config("{}");
  CHECK(cfg.pipeline.eta == 0.05);
  CHECK(cfg.pipeline.T == 50);
  CHECK(cfg.pipeline.K == 20);
  CHECK(cfg.pipeline.lambda == 0.05);
  CHECK(cfg.pipeline.tau == 1.0);
  CHECK(cfg.pipeline.mode == SelectionMode::greedy);
  CHECK(cfg.pipeline.L_max == 64);
  CHECK(cfg.pipeline.R == 1);
  CHECK(cfg.pipeline.alpha == 0.0);
  CHECK(cfg.pipeline.pair_report == PairReport::filtered);
  CHECK(cfg.pipeline.init == PromptInit::raw_report);
  CHECK(cfg.model.D == 16);
}

TEST_CASE("fields parse and the fingerprint ignores ordering") {
  const auto a = parse_run_config(R"({"eta": 0.1, "mode": "softmax", "tau": 0.5, "model": {"D": 8}})");
  const auto b = parse_run_config(R"({"model": {"D": 8}, "tau": 0.5, "mode": "softmax", "eta": 0.1})");
  CHECK(a.pipeline.mode == SelectionMode::softmax);
  CHECK(a.model.D == 8);
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  CHECK(config_fingerprint(a).size() == 64);
  // defaults written out explicitly hash the same as omitted ones
  CHECK(config_fingerprint(parse_run_config("{}")) == config_fingerprint(parse_run_config(R"({"K": 20})")));
  // any semantic change moves it
  CHECK(config_fingerprint(a) != config_fingerprint(parse_run_config(R"({"eta": 0.1, "mode": "softmax", "tau": 0.5})")));
  CHECK(config_fingerprint(parse_run_config("{}")) != config_fingerprint(parse_run_config(R"({"seed": 1})")));
}

TEST_CASE("bad configs") {
  CHECK_THROWS_AS(parse_run_config(R"({"etta": 0.1})"), ParseError);
  CHECK_THROWS_AS(parse_run_config(R"({"K": -1})"), ParseError);
  CHECK_THROWS_AS(parse_run_config(R"({"K": 1.5})"), ParseError);
  CHECK_THROWS_AS(parse_run_config(R"({"mode": "beam"})"), ParseError);
  CHECK_THROWS_AS(parse_run_config(R"({"tau": 0})"), ParseError);
  CHECK_THROWS_AS(parse_run_config(R"({"alpha": 2})"), ParseError);
  CHECK_THROWS_AS(parse_run_config("{"), ParseError);
  CHECK_THROWS_AS(parse_run_config(R"({"model": {"D": 1}})"), ParseError);
}

TEST_CASE("sha256 known answer") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
