#include <random>
#include <sstream>

#include "doctest.h"
#include "lthm/corpus.hpp"
#include "lthm/error.hpp"
#include "oracles.hpp"

using namespace lthm;

namespace {

Corpus parse(const std::string& text, const VocabOptions& opts = {}) {
  std::istringstream in(text);
  return parse_corpus(in, opts);
}

std::vector<RawDocument> raw_docs(std::initializer_list<std::vector<std::string>> token_lists) {
  std::vector<RawDocument> out;
  int i = 0;
  for (const auto& toks : token_lists) out.push_back({0, "d" + std::to_string(i++), toks, {}});
  return out;
}

const char* kThreeDocs =
    R"({"id":"a","tokens":["x","y","z"],"links":[{"pos":0,"target":"c"}]}
{"id":"b","tokens":["x","x"],"links":[{"pos":1,"target":"c"},{"pos":0,"target":"a"}]}
{"id":"c","tokens":["y"],"links":[{"pos":0,"target":"c"}]}
)";

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("smallest well-formed corpus") {
    auto c = parse(R"({"id":"only","tokens":["a","b"],"links":[]})");
    CHECK(c.num_docs() == 1);
    CHECK(c.doc(0).size() == 2);
    CHECK(c.total_links() == 0);
    CHECK(c.total_tokens() == 2);
  }

  TEST_CASE("link position out of range is rejected with the line number") {
    std::string text =
        "{\"id\":\"a\",\"tokens\":[\"p\"]}\n"
        "{\"id\":\"b\",\"tokens\":[\"a\",\"b\",\"c\"],\"links\":[{\"pos\":5,\"target\":\"a\"}]}\n";
    try {
      parse(text);
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      std::string msg = e.what();
      CHECK(msg.find("line 2") != std::string::npos);
      CHECK(msg.find("link position out of range") != std::string::npos);
    }
  }

  TEST_CASE("self links are retained") {
    auto c = parse(R"({"id":"x","tokens":["a"],"links":[{"pos":0,"target":"x"}]}
{"id":"y","tokens":["a"]})");
    REQUIRE(c.total_links() == 1);
    CHECK(c.doc(0).links().front().target == 0);
  }

  TEST_CASE("validation errors") {
    CHECK_THROWS_AS(parse(R"({"id":"a","tokens":["x"]}
{"id":"a","tokens":["y"]})"),
                    DataError);
    CHECK_THROWS_AS(parse(R"({"id":"a","tokens":["x"],"links":[{"pos":0,"target":"nope"}]})"),
                    DataError);
    CHECK_THROWS_AS(parse(R"({"id":"a","tokens":["x","y"],"links":[{"pos":[0,1],"target":"a"}]})"),
                    DataError);
    CHECK_THROWS_AS(parse(R"({"id":"a","tokens":["x","y"],"links":[{"pos":0,"length":2,"target":"a"}]})"),
                    DataError);
    CHECK_THROWS_AS(
        parse(R"({"id":"a","tokens":["x"],"links":[{"pos":0,"target":"a"},{"pos":0,"target":"a"}]})"),
        DataError);
    CHECK_THROWS_AS(parse("not json"), DataError);
    CHECK_THROWS_AS(parse(""), DataError);
  }

  TEST_CASE("vocabulary frequency threshold") {
    auto docs = raw_docs({{"a", "a", "b"}});
    auto v = build_vocabulary(docs, 2, {});
    CHECK(v.size() == 1);
    CHECK(v.find("a") == WordId{0});
    CHECK_FALSE(v.find("b"));
  }

  TEST_CASE("vocabulary stopword removal") {
    auto docs = raw_docs({{"a", "b"}, {"a", "b"}});
    auto v = build_vocabulary(docs, 1, {"a"});
    CHECK(v.size() == 1);
    CHECK(v.find("b") == WordId{0});
  }

  TEST_CASE("vocabulary ordering: descending frequency, ties lexicographic") {
    auto docs = raw_docs({{"c", "b", "a", "c", "d", "b"}});
    auto v = build_vocabulary(docs, 1, {});
    CHECK(v.words() == std::vector<std::string>{"b", "c", "a", "d"});
  }

  TEST_CASE("empty vocabulary after filtering is an error") {
    auto docs = raw_docs({{"a", "b"}});
    CHECK_THROWS_AS(build_vocabulary(docs, 5, {}), DataError);
    CHECK_THROWS_AS(build_vocabulary(docs, 1, {"a", "b"}), DataError);
  }

  TEST_CASE("dropped link anchors move onto the placeholder word") {
    VocabOptions opts;
    opts.stopwords = {"the"};
    auto c = parse(R"({"id":"a","tokens":["the","cat","the","dog"],"links":[{"pos":2,"target":"b"},{"pos":3,"target":"a"}]}
{"id":"b","tokens":["cat"]})",
                   opts);
    const auto& d = c.doc(0);
    REQUIRE(d.size() == 3);  // first "the" dropped, linked "the" kept as placeholder
    auto ph = c.vocab().find(kLinkPlaceholder);
    REQUIRE(ph);
    CHECK(*ph == c.vocab_size() - 1);
    CHECK(d.tokens[1] == *ph);
    auto links = d.links();
    REQUIRE(links.size() == 2);
    CHECK(links[0].pos == 1);
    CHECK(links[0].target == 1);
    CHECK(links[1].pos == 2);
    CHECK(c.total_links() == 2);
  }

  TEST_CASE("serialize then parse gives an equal corpus") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      auto c = testing::random_corpus(2 + trial % 5, 3 + trial % 7, 12, 0.3, rng);
      // Re-index through the parser once so ids follow the vocabulary policy.
      std::ostringstream first;
      serialize_corpus(c, first);
      auto canonical = parse(first.str());
      std::ostringstream second;
      serialize_corpus(canonical, second);
      auto again = parse(second.str());
      CHECK(again == canonical);
      CHECK(second.str() == first.str());
    }
  }

  TEST_CASE("split: sizes, determinism and masking") {
    std::mt19937_64 rng(9);
    auto c10 = testing::random_corpus(10, 5, 6, 0.2, rng);
    auto s = split_train_test(c10, 0.1, 42);
    CHECK(s.test_docs.size() == 1);
    std::size_t train_sources = 0;
    for (DocIndex d = 0; d < 10; ++d) train_sources += s.train.links_visible(d);
    CHECK(train_sources == 9);
    CHECK(s.train.visible_link_count() + s.test.visible_link_count() == c10.total_links());

    auto c2 = testing::random_corpus(2, 3, 4, 0.5, rng);
    auto a = split_train_test(c2, 0.5, 7);
    auto b = split_train_test(c2, 0.5, 7);
    CHECK(a.test_docs == b.test_docs);

    CHECK_THROWS(split_train_test(c2, 0.99, 1));
    CHECK_THROWS(split_train_test(c2, 0.0, 1));
  }

  TEST_CASE("train view hides links originating from test documents") {
    auto c = parse(R"({"id":"a","tokens":["x","y"],"links":[{"pos":0,"target":"b"},{"pos":1,"target":"a"}]}
{"id":"b","tokens":["x"]})");
    auto s = split_from_test_set(c, {0});
    CHECK(s.train.visible_link_count() == 0);
    std::size_t seen = 0;
    s.train.for_each_link([&](DocIndex, const Link&) { ++seen; });
    CHECK(seen == 0);
    CHECK(s.train.link_target(0, 0) == kNoLink);
    CHECK(s.test.link_target(0, 0) == 1);
  }

  TEST_CASE("split file round trip") {
    auto c = parse(kThreeDocs);
    auto s = split_from_test_set(c, {1});
    std::stringstream io;
    write_split(c, s, io);
    CHECK(io.str() == "a\ttrain\nb\ttest\nc\ttrain\n");
    auto back = read_split(c, io);
    CHECK(back.test_docs == s.test_docs);
  }

  TEST_CASE("in-degree") {
    auto c = parse(kThreeDocs);
    auto none = in_degree(CorpusView::text_only(c));
    CHECK(none == std::vector<std::size_t>{0, 0, 0});

    auto all = in_degree(CorpusView::all_links(c));
    // links: a->c, b->c, b->a, c->c (self)
    CHECK(all == std::vector<std::size_t>{1, 0, 3});

    // Hide doc b: remaining visible links a->c and c->c.
    auto s = split_from_test_set(c, {1});
    auto vis = in_degree(s.train);
    CHECK(vis == std::vector<std::size_t>{0, 0, 2});
    CHECK(vis[0] + vis[1] + vis[2] == s.train.visible_link_count());
  }

  TEST_CASE("vocabulary file round trip") {
    Vocabulary v({"alpha", "beta", "gamma"});
    std::stringstream io;
    write_vocabulary(v, io);
    CHECK(io.str() == "alpha\t0\nbeta\t1\ngamma\t2\n");
    CHECK(read_vocabulary(io) == v);
  }
}
