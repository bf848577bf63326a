#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "data.hpp"
#include "errors.hpp"
#include "rng.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace xltk;

namespace {

const char* kHeader = "id,comment_text,toxic,severe_toxic,obscene,threat,insult,identity_hate\n";

std::vector<RawComment> parse(const std::string& body) {
  std::istringstream in(std::string(kHeader) + body);
  return read_comments(in);
}

std::vector<LabelVector> labels_of(const std::vector<RawComment>& rows) {
  std::vector<LabelVector> out;
  for (const auto& r : rows) out.push_back(r.labels);
  return out;
}

}  // namespace

TEST(Csv, AllNegativeRow) {
  auto rows = parse("x1,\"you are great\",0,0,0,0,0,0\n");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].id, "x1");
  EXPECT_EQ(rows[0].text, "you are great");
  EXPECT_FALSE(any_positive(rows[0].labels));
}

TEST(Csv, QuotedCommaAndNewline) {
  auto rows = parse("a,\"one \"\",\"\" two\nthree \"\"q\"\"\",1,0,0,0,0,1\n");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].text, "one \",\" two\nthree \"q\"");
  EXPECT_EQ(rows[0].labels, (LabelVector{1, 0, 0, 0, 0, 1}));
}

TEST(Csv, TenRowFixtureMatchesHandOracle) {
  const std::vector<LabelVector> oracle = {
      {0, 0, 0, 0, 0, 0}, {1, 0, 0, 0, 0, 0}, {1, 1, 1, 0, 1, 0}, {0, 0, 1, 0, 0, 0},
      {0, 0, 0, 1, 0, 0}, {1, 0, 0, 0, 1, 1}, {0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 1, 0},
      {1, 1, 1, 1, 1, 1}, {0, 0, 0, 0, 0, 1}};
  std::string body;
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    body += "r" + std::to_string(i) + ",\"text, number " + std::to_string(i) + "\"";
    for (auto v : oracle[i]) body += "," + std::to_string(v);
    body += "\r\n";
  }
  const auto rows = parse(body);
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(labels_of(rows), oracle);
}

TEST(Csv, ColumnsInAnyOrder) {
  std::istringstream in(
      "insult,comment_text,extra,identity_hate,threat,obscene,severe_toxic,toxic,id\n"
      "1,hi,zz,0,0,0,0,1,q\n");
  const auto rows = read_comments(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].id, "q");
  EXPECT_EQ(rows[0].labels, (LabelVector{1, 0, 0, 0, 1, 0}));
}

TEST(Csv, MissingColumnNamed) {
  std::istringstream in("id,comment_text,toxic,severe_toxic,obscene,threat,insult\nx,y,0,0,0,0,0\n");
  try {
    read_comments(in);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("identity_hate"), std::string::npos);
  }
}

TEST(Csv, BadLabelNamesRow) {
  try {
    parse("a,ok,0,0,0,0,0,0\nb,bad,0,2,0,0,0,0\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(Csv, MissingFileIsIoErrorNamingPath) {
  try {
    load_csv("/nonexistent/where.csv");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/where.csv"), std::string::npos);
  }
}

TEST(Csv, RoundTrip) {
  auto rows = parse("a,\"x, \"\"y\"\"\nz\",1,0,1,0,0,0\nb,plain,0,0,0,0,0,1\n");
  std::ostringstream out;
  write_comments(out, rows);
  std::istringstream in(out.str());
  const auto back = read_comments(in);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].id, rows[i].id);
    EXPECT_EQ(back[i].text, rows[i].text);
    EXPECT_EQ(back[i].labels, rows[i].labels);
  }
}

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize("Visit HTTP://x.y NOW"), "visit now");
  EXPECT_EQ(normalize("call 911 twice 911"), "call <NUM> twice <NUM>");
  EXPECT_EQ(normalize(""), "");
  EXPECT_EQ(normalize("  mail me at A.B@c.org   please\t\n"), "mail me at please");
  EXPECT_EQ(normalize("see www.example.com/x?y=1 ok"), "see ok");
}

TEST(Normalize, Idempotent) {
  Rng rng(4);
  const std::string alphabet = "abcXYZ 019 .,!?@:/\t\nhttp www";
  for (int i = 0; i < 500; ++i) {
    std::string s;
    const auto len = rng.below(60);
    for (std::uint64_t j = 0; j < len; ++j) s += alphabet[rng.below(alphabet.size())];
    const auto once = normalize(s);
    EXPECT_EQ(normalize(once), once) << s;
  }
}

TEST(Tokenize, SingleToken) {
  std::vector<std::vector<std::string>> docs = {{"hi", "hi"}};
  auto vocab = Vocabulary::build(docs, 1);
  const std::string text = "hi";
  auto chars = CharVocabulary::build(std::span(&text, 1), 1);
  auto s = tokenize("hi", vocab, chars);
  EXPECT_EQ(s.word_ids.size(), 300u);
  EXPECT_EQ(s.char_ids.size(), 800u);
  EXPECT_EQ(s.word_len, 1u);
  EXPECT_EQ(s.word_ids[0], vocab.id("hi"));
  EXPECT_EQ(s.word_ids[0], Vocabulary::kReserved);
  EXPECT_TRUE(std::all_of(s.word_ids.begin() + 1, s.word_ids.end(), [](auto v) { return v == 0; }));
  EXPECT_EQ(s.char_len, 2u);
}

TEST(Tokenize, TruncatesLongInput) {
  std::string text;
  for (int i = 0; i < 350; ++i) text += "w ";
  Vocabulary vocab;
  CharVocabulary chars;
  auto s = tokenize(normalize(text), vocab, chars);
  EXPECT_EQ(s.word_len, 300u);
  EXPECT_EQ(s.char_len, 699u);
  for (auto id : s.word_ids) EXPECT_EQ(id, Vocabulary::kUnk);
}

TEST(Tokenize, UnknownAndNumberIds) {
  Vocabulary vocab;
  CharVocabulary chars;
  auto s = tokenize(normalize("zebra 42"), vocab, chars);
  ASSERT_EQ(s.word_len, 2u);
  EXPECT_EQ(s.word_ids[0], Vocabulary::kUnk);
  EXPECT_EQ(s.word_ids[1], Vocabulary::kNum);
}

TEST(Tokenize, PunctuationSplits) {
  EXPECT_EQ(split_words("you,idiot!! <NUM>x"),
            (std::vector<std::string>{"you", ",", "idiot", "!", "!", "<NUM>", "x"}));
}

TEST(Tokenize, PaddingInvariantsOnRandomStrings) {
  Rng rng(8);
  std::vector<std::vector<std::string>> docs = {{"a", "a", "b", "b"}};
  auto vocab = Vocabulary::build(docs, 2);
  const std::string seed_text = "ab";
  auto chars = CharVocabulary::build(std::span(&seed_text, 1), 1);
  const TokenizerLimits limits{12, 30};
  for (int i = 0; i < 300; ++i) {
    std::string s;
    const auto len = rng.below(80);
    for (std::uint64_t j = 0; j < len; ++j) s += static_cast<char>(rng.below(256));
    const auto norm = normalize(s);
    const auto t = tokenize(norm, vocab, chars, limits);
    ASSERT_EQ(t.word_ids.size(), 12u);
    ASSERT_EQ(t.char_ids.size(), 30u);
    ASSERT_LE(t.word_len, 12u);
    ASSERT_LE(t.char_len, 30u);
    for (std::size_t k = 0; k < 12; ++k) EXPECT_EQ(k >= t.word_len, t.word_ids[k] == 0);
    for (std::size_t k = 0; k < 30; ++k) EXPECT_EQ(k >= t.char_len, t.char_ids[k] == 0);
    EXPECT_EQ(tokenize(normalize(norm), vocab, chars, limits), t);
  }
}

TEST(VocabularyTest, ReservedNeverAssigned) {
  std::vector<std::vector<std::string>> docs = {
      {"<PAD>", "<PAD>", "<UNK>", "<UNK>", "<NUM>", "<NUM>", "x", "x", "y", "y", "y", "z"}};
  auto v = Vocabulary::build(docs, 2);
  EXPECT_EQ(v.size(), Vocabulary::kReserved + 2);
  EXPECT_EQ(v.id("y"), 3u);  // higher count first
  EXPECT_EQ(v.id("x"), 4u);
  EXPECT_EQ(v.id("z"), Vocabulary::kUnk);
  EXPECT_EQ(v.id("<NUM>"), Vocabulary::kNum);
  std::set<std::uint32_t> ids;
  for (std::uint32_t i = Vocabulary::kReserved; i < v.size(); ++i) EXPECT_TRUE(ids.insert(v.id(v.token(i))).second);
}

TEST(VocabularyTest, SaveLoadRoundTrip) {
  auto dir = test::scratch_dir("vocab");
  std::vector<std::vector<std::string>> docs = {{"b", "a", "a", "ü", "ü"}};
  auto v = Vocabulary::build(docs, 1);
  v.save(dir / "v.txt");
  auto back = Vocabulary::load(dir / "v.txt");
  ASSERT_EQ(back.size(), v.size());
  for (std::uint32_t i = 0; i < v.size(); ++i) EXPECT_EQ(back.token(i), v.token(i));
  const std::vector<std::string> texts = {"héllo"};
  auto c = CharVocabulary::build(texts, 1);
  c.save(dir / "c.txt");
  auto cb = CharVocabulary::load(dir / "c.txt");
  EXPECT_EQ(cb.size(), c.size());
  EXPECT_EQ(cb.id(U'é'), c.id(U'é'));
  EXPECT_EQ(cb.id(U'q'), CharVocabulary::kUnk);
}

TEST(Split, PrevalenceWithinBand) {
  std::vector<LabelVector> labels(1000);
  for (std::size_t i = 0; i < 50; ++i) labels[i * 20][2] = 1;
  auto s = stratified_split(labels, {});
  EXPECT_EQ(s.train.size(), 800u);
  EXPECT_EQ(s.valid.size(), 100u);
  EXPECT_EQ(s.test.size(), 100u);
  for (const auto* part : {&s.train, &s.valid, &s.test}) {
    double pos = 0;
    for (auto i : *part) pos += labels[i][2];
    const double p = pos / static_cast<double>(part->size());
    EXPECT_GE(p, 0.04);
    EXPECT_LE(p, 0.06);
  }
}

TEST(Split, PartitionsAndIsDeterministic) {
  SyntheticSpec spec;
  spec.samples = 777;
  const auto corpus = synthetic_corpus(spec);
  std::vector<LabelVector> labels;
  for (const auto& r : corpus) labels.push_back(r.labels);
  SplitSpec ss;
  ss.seed = 9;
  auto a = stratified_split(labels, ss);
  auto b = stratified_split(labels, ss);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.valid, b.valid);
  EXPECT_EQ(a.test, b.test);
  std::vector<std::size_t> all = a.train;
  all.insert(all.end(), a.valid.begin(), a.valid.end());
  all.insert(all.end(), a.test.begin(), a.test.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(labels.size());
  std::iota(expect.begin(), expect.end(), 0);
  EXPECT_EQ(all, expect);
  ss.seed = 10;
  EXPECT_NE(stratified_split(labels, ss).train, a.train);
}

TEST(Split, SingleStratumPlainSplit) {
  std::vector<LabelVector> labels(50);
  auto s = stratified_split(labels, {});
  EXPECT_EQ(s.train.size(), 40u);
  EXPECT_EQ(s.valid.size(), 5u);
  EXPECT_EQ(s.test.size(), 5u);
}

TEST(Split, TooSmallRefused) {
  std::vector<LabelVector> labels(9);
  EXPECT_THROW(stratified_split(labels, {}), SizeError);
}

TEST(TokenCache, RoundTripAndVersionCheck) {
  auto dir = test::scratch_dir("cache");
  Vocabulary vocab;
  CharVocabulary chars;
  const TokenizerLimits limits{5, 9};
  std::vector<TokenizedSample> samples = {tokenize("a b", vocab, chars, limits),
                                          tokenize("", vocab, chars, limits)};
  samples[0].labels = {1, 0, 0, 1, 0, 0};
  save_token_cache(dir / "c.bin", samples, limits);
  TokenizerLimits got;
  EXPECT_EQ(load_token_cache(dir / "c.bin", &got), samples);
  EXPECT_EQ(got.max_tokens, 5u);
  auto bytes = test::read_file(dir / "c.bin");
  EXPECT_EQ(bytes.substr(0, 4), "XLTK");
  bytes[4] = 9;
  test::write_file(dir / "bad.bin", bytes);
  EXPECT_THROW(load_token_cache(dir / "bad.bin"), ParseError);
}
