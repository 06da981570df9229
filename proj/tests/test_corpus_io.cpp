#include <doctest.h>

#include <cmath>
#include <fstream>

#include "kmq/io.hpp"
#include "kmq/rng.hpp"
#include "kmq/simulate.hpp"
#include "test_support.hpp"

using namespace kmq;
using kmqtest::make_corpus;
using kmqtest::temp_dir;

TEST_CASE("jsonl load: 3 records of dim 4") {
  auto dir = temp_dir("jsonl3");
  {
    std::ofstream out(dir / "c.jsonl");
    out << R"({"id":"a","embedding":[1,0,0,0],"quality":0.5,"text":"hi"})" << "\n";
    out << R"({"id":"b","embedding":[0,1,0,0],"quality":null,"text":null})" << "\n";
    out << R"({"id":"c","embedding":[0,0,1,0],"quality":1.0,"text":"x"})" << "\n";
  }
  Corpus c = load_corpus(dir / "c.jsonl", CorpusFormat::kJsonl);
  CHECK(c.dimension() == 4);
  CHECK(c.size() == 3);
  CHECK(c.id_of(0) == "a");  // file order preserved
  CHECK(c.id_of(2) == "c");
  CHECK(c.quality()[0] == 0.5);
  CHECK(!c.has_quality(1));
  CHECK(c.text()[0].value() == "hi");
  CHECK(!c.text()[1].has_value());
}

TEST_CASE("jsonl load: dimension mismatch names the offending id") {
  auto dir = temp_dir("dimerr");
  {
    std::ofstream out(dir / "c.jsonl");
    out << R"({"id":"a","embedding":[1,0,0,0]})" << "\n";
    out << R"({"id":"bad","embedding":[1,0,0]})" << "\n";
  }
  CHECK_THROWS_WITH_AS(load_corpus(dir / "c.jsonl", CorpusFormat::kJsonl),
                       doctest::Contains("bad"), DataError);
}

TEST_CASE("jsonl load errors: malformed line, duplicate id, non-finite") {
  auto dir = temp_dir("jsonl_err");
  {
    std::ofstream out(dir / "bad.jsonl");
    out << R"({"id":"a","embedding":[1,2]})" << "\n";
    out << "not json\n";
  }
  CHECK_THROWS_WITH_AS(load_corpus(dir / "bad.jsonl", CorpusFormat::kJsonl),
                       doctest::Contains(":2"), DataError);
  {
    std::ofstream out(dir / "dup.jsonl");
    out << R"({"id":"a","embedding":[1,2]})" << "\n";
    out << R"({"id":"a","embedding":[3,4]})" << "\n";
  }
  CHECK_THROWS_AS(load_corpus(dir / "dup.jsonl", CorpusFormat::kJsonl), DataError);
  {
    std::ofstream out(dir / "inf.jsonl");
    out << R"({"id":"a","embedding":[1,1e999]})" << "\n";
  }
  CHECK_THROWS_AS(load_corpus(dir / "inf.jsonl", CorpusFormat::kJsonl), DataError);
}

TEST_CASE("load-save round trip is the identity for both formats") {
  auto dir = temp_dir("roundtrip");
  // float-representable values so the binary f32 path is lossless
  Corpus c = make_corpus({{1.0, 0.5}, {0.25, -2.0}, {3.5, 0.125}}, {0.5, 0.75});
  for (auto format : {CorpusFormat::kJsonl, CorpusFormat::kBinary}) {
    const auto path = dir / (format == CorpusFormat::kJsonl ? "c.jsonl" : "c.bin");
    save_corpus(c, path, format);
    Corpus back = load_corpus(path, format);
    REQUIRE(back.size() == c.size());
    CHECK(back.dimension() == c.dimension());
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      CHECK(back.id_of(i) == c.id_of(i));
      CHECK(back.points().col(i) == c.points().col(i));
      if (c.has_quality(i))
        CHECK(back.quality()[i] == c.quality()[i]);
      else
        CHECK(!back.has_quality(i));
    }
    // determinism: identical bytes give identical values
    Corpus again = load_corpus(path, format);
    CHECK(again.points() == back.points());
    CHECK(again.ids() == back.ids());
  }
}

TEST_CASE("selection manifest round trip") {
  auto dir = temp_dir("sel");
  Selection s;
  s.ids = {"a", "b"};
  s.budget = 2;
  s.method = "kmq";
  s.params = {{"seed", "42"}};
  save_selection(s, dir / "sel.json");
  Selection back = load_selection(dir / "sel.json");
  CHECK(back.ids == s.ids);
  CHECK(back.budget == s.budget);
  CHECK(back.method == s.method);
  CHECK(back.params == s.params);
}

TEST_CASE("degenerate selection is rejected before write") {
  auto dir = temp_dir("sel_bad");
  Selection s;
  s.budget = 0;
  CHECK_THROWS_AS(save_selection(s, dir / "x.json"), DataError);
}

TEST_CASE("large selection manifest keeps id order") {
  auto dir = temp_dir("sel_big");
  Selection s;
  s.budget = 10000;
  s.method = "kmq";
  for (int i = 0; i < 10000; ++i) s.ids.push_back("id" + std::to_string(i));
  save_selection(s, dir / "big.json");
  Selection back = load_selection(dir / "big.json");
  CHECK(back.ids == s.ids);
}

TEST_CASE("attach_scores changes only the named instance") {
  Corpus c = make_corpus({{0, 0}, {1, 1}});
  Corpus scored = c.with_scores({{"a", 0.9}});
  CHECK(scored.quality()[0] == 0.9);
  CHECK(!scored.has_quality(1));
  CHECK(scored.points() == c.points());  // embeddings untouched
  CHECK(scored.ids() == c.ids());
  CHECK_THROWS_AS(c.with_scores({{"a", 1.3}}), DataError);
  CHECK_THROWS_AS(c.with_scores({{"zz", 0.5}}), DataError);
}

TEST_CASE("attach_scores populates every field at scale") {
  SyntheticSpec spec;
  spec.n = 5000;
  spec.dimension = 4;
  Corpus c = generate_synthetic(spec);
  std::map<std::string, double> scores;
  for (Eigen::Index i = 0; i < c.size(); ++i) scores[c.id_of(i)] = 0.25;
  Corpus scored = c.with_scores(scores);
  int populated = 0;
  for (Eigen::Index i = 0; i < scored.size(); ++i)
    if (scored.has_quality(i)) ++populated;
  CHECK(populated == 5000);
}

TEST_CASE("binary format parses a WizardLM-scale corpus") {
  // 196K records, small dimension to keep the fixture fast
  auto dir = temp_dir("scale");
  SyntheticSpec spec;
  spec.n = 196000;
  spec.dimension = 4;
  Corpus c = generate_synthetic(spec);
  save_corpus(c, dir / "big.bin", CorpusFormat::kBinary);
  Corpus back = load_corpus(dir / "big.bin", CorpusFormat::kBinary);
  CHECK(back.size() == 196000);
  std::filesystem::remove_all(dir);
}

TEST_CASE("quality outside [0,1] is rejected at load") {
  auto dir = temp_dir("qbad");
  std::ofstream(dir / "c.jsonl")
      << R"({"id":"a","embedding":[1,2],"quality":1.5})" << "\n";
  CHECK_THROWS_AS(load_corpus(dir / "c.jsonl", CorpusFormat::kJsonl), DataError);
}

TEST_CASE("rng streams are stable and distinct") {
  Rng a = Rng::stream(42, 0, 0);
  Rng a2 = Rng::stream(42, 0, 0);
  Rng b = Rng::stream(42, 0, 1);
  CHECK(a.next_u64() == a2.next_u64());
  Rng c = Rng::stream(42, 0, 0);
  CHECK(c.next_u64() != b.next_u64());
}
