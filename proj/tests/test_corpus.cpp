#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "mtmrc/corpus.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace mtmrc;
using namespace mtmrc::testing;

namespace {

const char* kTwoSpans = R"([
  {"id": "a", "question": "Who went?", "passage": "Bob went home .", "answer_begin": 0, "answer_end": 0},
  {"id": "b", "question": "Where?", "passage": "to the old mill", "answer_begin": 1, "answer_end": 3}
])";

std::vector<std::string> random_words(Rng& rng, std::size_t n, std::size_t alphabet) {
  std::uniform_int_distribution<std::size_t> pick(0, alphabet - 1);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('a' + pick(rng))));
  return out;
}

TokenSeq as_tokens(const std::vector<std::string>& words) {
  TokenSeq t;
  for (const auto& w : words) t.push_back(make_token(w));
  return t;
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("tokenizer splits whitespace and punctuation, keeps UTF-8 words") {
    const auto t = surfaces(tokenize("Hello, world!  It's caf\xc3\xa9-time"));
    CHECK(t == std::vector<std::string>{"Hello", ",", "world", "!", "It", "'", "s", "caf\xc3\xa9", "-", "time"});
    CHECK(tokenize("   ").empty());
  }

  TEST_CASE("token fields: lower-case and suffix lemma with a four-letter stem") {
    const Token t = make_token("Walking");
    CHECK(t.lower == "walking");
    CHECK(t.lemma == "walk");
    CHECK(make_token("boxes").lemma == "boxe");  // "box" is too short for -es, so -s applies
    CHECK(make_token("played").lemma == "play");
    CHECK(make_token("cats").lemma == "cats");
    CHECK(make_token("houses").lemma == "hous");
    CHECK(make_token("sing").lemma == "sing");
  }

  TEST_CASE("well-formed file loads two samples") {
    const auto ds = parse_dataset(kTwoSpans, DataFormat::SpanJson);
    REQUIRE(ds.size() == 2);
    CHECK(ds.samples[0].id == "a");
    CHECK(surfaces(ds.samples[0].question) == std::vector<std::string>{"Who", "went", "?"});
    CHECK(ds.samples[1].span() == Span{1, 3});
    CHECK(ds.stats.count == 2);
    CHECK(ds.stats.avg_passage_tokens == doctest::Approx(4.0));
    CHECK(*ds.stats.avg_answer_tokens == doctest::Approx(2.0));
    CHECK(ds.vocab.count("bob") == 1);
  }

  TEST_CASE("load from disk and unreadable path") {
    const auto path = std::filesystem::temp_directory_path() / "mtmrc_corpus_test.json";
    std::ofstream(path) << kTwoSpans;
    CHECK(load_dataset(path, DataFormat::SpanJson, 2).samples[1].task_id == 2);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_dataset(path, DataFormat::SpanJson), InputError);
  }

  TEST_CASE("malformed JSON reports the line") {
    const std::string bad = "[\n {\"id\": \"a\",\n  \"question\": \"q\"\n  \"passage\": \"p\"}\n]";
    try {
      parse_dataset(bad, DataFormat::SpanJson);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
      CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
  }

  TEST_CASE("answer begin > end is a data error naming the sample") {
    const char* bad = R"([{"id": "zz9", "question": "q", "passage": "a b c", "answer_begin": 2, "answer_end": 1}])";
    try {
      parse_dataset(bad, DataFormat::SpanJson);
      FAIL("expected a data error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("zz9") != std::string::npos);
    }
    const char* out = R"([{"id": "x", "question": "q", "passage": "a b c", "answer_begin": 1, "answer_end": 3}])";
    CHECK_THROWS_AS(parse_dataset(out, DataFormat::SpanJson), DataError);
    const char* missing = R"([{"id": "x", "question": "q", "passage": "a b c", "answer_begin": 1}])";
    CHECK_THROWS_AS(parse_dataset(missing, DataFormat::SpanJson), DataError);
  }

  TEST_CASE("empty sample list gives zero stats") {
    const auto ds = parse_dataset("[]", DataFormat::SpanJson);
    CHECK(ds.stats.count == 0);
    CHECK(ds.stats.avg_passage_tokens == 0.0);
    CHECK_FALSE(ds.stats.avg_answer_tokens.has_value());
  }

  TEST_CASE("cloze format: candidates validated, answer-token mean absent") {
    const char* ok = R"([{"id": "c", "question": "who ?", "passage": "Ann met Bob and Ann", "candidates": [[0,4],[2]], "gold": 1}])";
    const auto ds = parse_dataset(ok, DataFormat::ClozeJson);
    CHECK(ds.samples[0].cloze().candidates[0] == std::vector<std::size_t>{0, 4});
    CHECK_FALSE(ds.stats.avg_answer_tokens.has_value());
    const char* empty_cand = R"([{"id": "c", "question": "q", "passage": "a b", "candidates": [[0],[]], "gold": 0}])";
    CHECK_THROWS_AS(parse_dataset(empty_cand, DataFormat::ClozeJson), DataError);
    const char* bad_gold = R"([{"id": "c", "question": "q", "passage": "a b", "candidates": [[0]], "gold": 1}])";
    CHECK_THROWS_AS(parse_dataset(bad_gold, DataFormat::ClozeJson), DataError);
  }

  TEST_CASE("dataset stats are exact means") {
    std::vector<Sample> v{span_sample("q", "a b c", 0, 0), span_sample("q", "a b c d e", 1, 3)};
    const auto st = dataset_stats(v);
    CHECK(st.avg_passage_tokens == 4.0);
    CHECK(*st.avg_answer_tokens == 2.0);
  }

  TEST_CASE("serialize then load reproduces tokens exactly") {
    auto ds = parse_dataset(kTwoSpans, DataFormat::SpanJson);
    ds.samples.push_back(span_sample("caf\xc3\xa9 ?", "don't \"quote\" me", 0, 2, "c"));
    ds = make_dataset(1, "x", ds.samples);
    const auto again = parse_dataset(serialize_dataset(ds), DataFormat::SpanJson);
    REQUIRE(again.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      CHECK(again.samples[i].id == ds.samples[i].id);
      CHECK(again.samples[i].question == ds.samples[i].question);
      CHECK(again.samples[i].passage == ds.samples[i].passage);
      CHECK(again.samples[i].answer == ds.samples[i].answer);
    }
    CHECK(serialize_dataset(again) == serialize_dataset(ds));
  }

  TEST_CASE("span conversion examples") {
    auto m = best_rouge_span(toks("a b c d"), toks("b c"));
    REQUIRE(m);
    CHECK(m->span == Span{1, 2});
    CHECK(m->score == 1.0);
    m = best_rouge_span(toks("a b a b"), toks("a b"));
    CHECK(m->span == Span{0, 1});

    GenerativeSample g{"g", toks("q"), toks("x y z"), toks("q r s t")};
    CHECK_FALSE(convert_generative_to_span(g).has_value());
    const auto oracle_best = oracle::best_span({"x", "y", "z"}, {"q", "r", "s", "t"});
    CHECK(oracle_best->score < 0.5);

    GenerativeSample ok{"g2", toks("q"), toks("the old mill stood"), toks("old mill")};
    const auto s = convert_generative_to_span(ok);
    REQUIRE(s);
    CHECK(s->span() == Span{1, 2});
    CHECK(s->id == "g2");
  }

  TEST_CASE("span search agrees with an exhaustive scan") {
    Rng rng(17);
    std::uniform_int_distribution<std::size_t> plen(1, 50), alen(1, 6), alpha(2, 8);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t a = alpha(rng);
      const auto passage = random_words(rng, plen(rng), a);
      const auto answer = random_words(rng, alen(rng), a);
      const auto got = best_rouge_span(as_tokens(passage), as_tokens(answer));
      const auto want = oracle::best_span(passage, answer);
      REQUIRE(got);
      CHECK(got->span.begin == want->begin);
      CHECK(got->span.end == want->end);
      CHECK(got->score == doctest::Approx(want->score).epsilon(1e-12));
      const auto conv = convert_generative_to_span({"r", toks("q"), as_tokens(passage), as_tokens(answer)});
      CHECK(conv.has_value() == (want->score >= 0.5));
    }
  }

  TEST_CASE("minibatches partition the dataset") {
    std::vector<Sample> v;
    for (int i = 0; i < 10; ++i) v.push_back(span_sample("q", "a b", 0, 0, "s" + std::to_string(i)));
    const auto ds = make_dataset(3, "t", v);
    Rng r1(5), r2(5);
    const auto b = make_minibatches(ds, 4, r1);
    REQUIRE(b.size() == 3);
    CHECK(b[0].indices.size() == 4);
    CHECK(b[1].indices.size() == 4);
    CHECK(b[2].indices.size() == 2);
    std::multiset<std::size_t> seen;
    for (const auto& mb : b) {
      CHECK(mb.task_id == 3);
      seen.insert(mb.indices.begin(), mb.indices.end());
    }
    CHECK(seen == std::multiset<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    const auto again = make_minibatches(ds, 4, r2);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(again[i].indices == b[i].indices);

    std::vector<Sample> v32(32, span_sample("q", "a", 0, 0));
    Rng r3(1);
    CHECK(make_minibatches(make_dataset(1, "t", v32), 32, r3).size() == 1);
    CHECK_THROWS_AS(make_minibatches(ds, 0, r3), ConfigError);
  }

  TEST_CASE("truncation never leaves an answer beyond the limit") {
    std::vector<Sample> v{span_sample("q", "a b c d e f", 1, 2, "keep"), span_sample("q", "a b c d e f", 3, 4, "drop"),
                          span_sample("q", "a b", 0, 1, "short")};
    Sample c;
    c.id = "cloze";
    c.question = toks("q");
    c.passage = toks("a b c d e f");
    c.answer = Cloze{{{5}, {0, 4}, {2}}, 1};
    v.push_back(c);
    const auto out = truncate_passages(make_dataset(1, "t", v), 4);
    REQUIRE(out.size() == 3);
    for (const auto& s : out.samples) {
      CHECK(s.passage.size() <= 4);
      if (s.is_span()) CHECK(s.span().end < 4);
    }
    const auto& cz = out.samples[2].cloze();
    CHECK(cz.candidates == std::vector<std::vector<std::size_t>>{{0}, {2}});
    CHECK(cz.gold == 0);
  }
}
