#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <map>
#include <string>

#include "edag/config.hpp"
#include "edag/errors.hpp"

using namespace edag;

TEST_CASE("key-value parser handles comments, blanks, and spacing") {
  const std::string text =
      "# full-line comment\n"
      "\n"
      "d_w = 32\n"
      "  layers=2   # trailing comment\n"
      "dropout =0.0\n";
  const auto kv = parse_key_values(text);
  REQUIRE(kv.size() == 3);
  CHECK(kv.at("d_w") == "32");
  CHECK(kv.at("layers") == "2");
  CHECK(kv.at("dropout") == "0.0");
}

TEST_CASE("key-value parser rejects malformed lines") {
  CHECK_THROWS_AS(parse_key_values("just some words\n"), ConfigError);
  CHECK_THROWS_AS(parse_key_values("= 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_key_values("d_w =\n"), ConfigError);
  CHECK_THROWS_AS(parse_key_values("d_w = 8\nd_w = 16\n"), ConfigError);
  // Line numbers appear in the message.
  CHECK_THROWS_WITH_AS(parse_key_values("d_w = 8\noops\n"),
                       "config: line 2 is not 'key = value': 'oops'", ConfigError);
}

TEST_CASE("empty configuration yields the published defaults") {
  const ResolvedConfig cfg = resolve_config({}, {});
  CHECK(cfg.model.d_w == 768);
  CHECK(cfg.model.max_sentences == 64);
  CHECK(cfg.model.max_sentence_len == 128);
  CHECK(cfg.model.num_layers == 4);
  CHECK(cfg.model.ff_dim == 1024);
  CHECK(cfg.model.num_heads == 8);
  CHECK(cfg.model.dropout == doctest::Approx(0.1));
  CHECK(cfg.model.lambda_er == doctest::Approx(0.05));
  CHECK(cfg.model.lambda_tr == doctest::Approx(0.95));
  CHECK(cfg.model.lambda_dag == doctest::Approx(0.95));
  CHECK(cfg.model.gamma == doctest::Approx(3.0));
  CHECK(cfg.model.sched_start_epoch == 10);
  CHECK(cfg.model.sched_end_epoch == 20);
  CHECK(cfg.train.lr == doctest::Approx(1e-4));
  CHECK(cfg.train.batch_size == 4);
  CHECK(cfg.train.max_epochs == 100);
  // The echo covers every key.
  CHECK(cfg.raw.size() == config_keys().size());
  CHECK(cfg.raw.at("d_w") == "768");
  CHECK(cfg.raw.at("use_path_memory") == "true");
}

TEST_CASE("command-line overrides beat the file, which beats defaults") {
  const std::map<std::string, std::string> file = {{"d_w", "32"}, {"layers", "2"}};
  const std::map<std::string, std::string> flags = {{"d_w", "16"}, {"heads", "2"}};
  const ResolvedConfig cfg = resolve_config(file, flags);
  CHECK(cfg.model.d_w == 16);        // flag beats file
  CHECK(cfg.model.num_layers == 2);  // file beats default
  CHECK(cfg.model.num_heads == 2);   // flag beats default
  CHECK(cfg.model.ff_dim == 1024);   // untouched default
  CHECK(cfg.raw.at("d_w") == "16");
}

TEST_CASE("environment seed is a fallback below the file and flags") {
  const std::map<std::string, std::string> env = {{"seed", "777"}};
  CHECK(resolve_config({}, {}, env).train.seed == 777);
  CHECK(resolve_config({{"seed", "5"}}, {}, env).train.seed == 5);
  CHECK(resolve_config({{"seed", "5"}}, {{"seed", "6"}}, env).train.seed == 6);
}

TEST_CASE("unknown keys are rejected with a nearest suggestion") {
  CHECK_THROWS_WITH_AS(resolve_config({{"d_q", "8"}}, {}),
                       "config: unknown key 'd_q'; did you mean 'd_w'?", ConfigError);
  CHECK_THROWS_WITH_AS(resolve_config({}, {{"lamda_tr", "0.9"}}),
                       "config: unknown key 'lamda_tr'; did you mean 'lambda_tr'?",
                       ConfigError);
  // Nothing close: no suggestion offered.
  CHECK_THROWS_WITH_AS(resolve_config({{"zzzzzzzzzzzz", "1"}}, {}),
                       "config: unknown key 'zzzzzzzzzzzz'", ConfigError);
}

TEST_CASE("values must parse as the field's type") {
  CHECK_THROWS_AS(resolve_config({{"d_w", "eight"}}, {}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"d_w", "8.5"}}, {}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"dropout", "lots"}}, {}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"use_path_memory", "maybe"}}, {}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"seed", "-1"}}, {}), ConfigError);
  CHECK_NOTHROW(resolve_config({{"dropout", "0.25"}}, {}));
  CHECK(resolve_config({{"use_path_memory", "0"}}, {}).model.use_path_memory == false);
}

TEST_CASE("resolution validates the combined result") {
  // d_w 10 is not divisible by the default 8 heads.
  CHECK_THROWS_AS(resolve_config({{"d_w", "10"}}, {}), ConfigError);
  CHECK_NOTHROW(resolve_config({{"d_w", "10"}, {"heads", "2"}}, {}));
  CHECK_THROWS_AS(resolve_config({{"lr", "0"}}, {}), ConfigError);
}

TEST_CASE("config files round-trip through disk") {
  const std::string path = "config_test_tmp.cfg";
  {
    std::ofstream out(path);
    out << "# comment\nd_w = 24\nheads = 2\nlr = 0.002\n";
  }
  const auto kv = read_config_file(path);
  const ResolvedConfig cfg = resolve_config(kv, {});
  CHECK(cfg.model.d_w == 24);
  CHECK(cfg.train.lr == doctest::Approx(0.002));
  std::remove(path.c_str());

  CHECK_THROWS_AS(read_config_file("no/such/file.cfg"), IoError);
}

TEST_CASE("edit distance matches hand-computed examples") {
  CHECK(levenshtein("", "") == 0);
  CHECK(levenshtein("abc", "abc") == 0);
  CHECK(levenshtein("abc", "") == 3);
  CHECK(levenshtein("d_q", "d_w") == 1);
  CHECK(levenshtein("kitten", "sitting") == 3);
  CHECK(levenshtein("flaw", "lawn") == 2);
}
