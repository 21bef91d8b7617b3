#include <fstream>

#include "sarfsl/core/container.hpp"
#include "sarfsl/core/io.hpp"
#include "sarfsl/core/json.hpp"
#include "sarfsl/core/rng.hpp"
#include "test_util.hpp"

namespace sarfsl {
namespace {

using testing::error_kind_of;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
}

TEST(Rng, SampleWithoutReplacementIsDistinct) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    const std::size_t k = rng.below(n + 1);
    auto idx = sample_without_replacement(n, k, rng);
    ASSERT_EQ(idx.size(), k);
    std::sort(idx.begin(), idx.end());
    EXPECT_TRUE(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
    for (std::size_t i : idx) EXPECT_LT(i, n);
  }
}

TEST(Rng, BernoulliEdges) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    EXPECT_TRUE(rng.bernoulli(1.0));
    EXPECT_FALSE(rng.bernoulli(0.0));
  }
}

TEST(JsonReader, ReadsKnownKeysAndRejectsUnknown) {
  const Json j = parse_json(R"({"a": 3, "b": [1.5, 2.5], "c": {"d": true}})", "inline");
  JsonReader r(j, "root");
  int a = 0;
  std::pair<double, double> b;
  r.get("a", a);
  r.get("b", b);
  EXPECT_EQ(a, 3);
  EXPECT_DOUBLE_EQ(b.second, 2.5);
  try {
    r.finish();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("root.c"), std::string::npos);
  }
}

TEST(JsonReader, TypeMismatchIsConfigError) {
  const Json j = parse_json(R"({"a": "x"})", "inline");
  JsonReader r(j, "");
  int a = 0;
  EXPECT_EQ(error_kind_of([&] { r.get("a", a); }), ErrorKind::kConfig);
}

TEST(JsonReader, SyntaxErrorIsConfigError) {
  EXPECT_EQ(error_kind_of([] { parse_json("{not json", "inline"); }), ErrorKind::kConfig);
}

TEST(JsonOverride, CreatesAndReplacesNestedValues) {
  Json j = parse_json(R"({"ssl": {"epochs": 3}})", "inline");
  apply_override(j, "ssl.epochs=7");
  apply_override(j, "ssl.algorithm=byol");
  apply_override(j, "evaluate.ways=[2,3]");
  EXPECT_EQ(j["ssl"]["epochs"].get<int>(), 7);
  EXPECT_EQ(j["ssl"]["algorithm"].get<std::string>(), "byol");
  EXPECT_EQ(j["evaluate"]["ways"].size(), 2u);
  EXPECT_EQ(error_kind_of([&] { apply_override(j, "novalue"); }), ErrorKind::kConfig);
}

TEST(Io, AtomicWriteRoundTrip) {
  const auto dir = testing::temp_dir("io");
  write_file_atomic(dir / "f.txt", "hello");
  EXPECT_EQ(read_text_file(dir / "f.txt"), "hello");
  write_file_atomic(dir / "f.txt", "bye");
  EXPECT_EQ(read_text_file(dir / "f.txt"), "bye");
  EXPECT_EQ(error_kind_of([&] { read_text_file(dir / "missing"); }), ErrorKind::kLoad);
}

TEST(Io, FormatRealRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 12345.678e-9, -2.5}) {
    EXPECT_EQ(std::stod(format_real(v)), v);
  }
}

TEST(Container, RoundTrip) {
  const auto dir = testing::temp_dir("ck");
  Container c;
  c.kind = "test";
  c.header["x"] = 5;
  c.values = {1.0f, -2.5f, 3.25f};
  save_container(dir / "a.ck", c);
  const Container back = load_container(dir / "a.ck", "test");
  EXPECT_EQ(back.header["x"].get<int>(), 5);
  EXPECT_EQ(back.values, c.values);
}

TEST(Container, CorruptionIsSchemaError) {
  const auto dir = testing::temp_dir("ck");
  Container c;
  c.kind = "test";
  c.values = {1.0f, 2.0f};
  save_container(dir / "a.ck", c);
  EXPECT_EQ(error_kind_of([&] { load_container(dir / "a.ck", "other"); }), ErrorKind::kSchema);

  std::string bytes = read_text_file(dir / "a.ck");
  write_file_atomic(dir / "trunc.ck", bytes.substr(0, bytes.size() - 3));
  EXPECT_EQ(error_kind_of([&] { load_container(dir / "trunc.ck", "test"); }), ErrorKind::kSchema);
  write_file_atomic(dir / "extra.ck", bytes + "x");
  EXPECT_EQ(error_kind_of([&] { load_container(dir / "extra.ck", "test"); }), ErrorKind::kSchema);
  bytes[0] = 'X';
  write_file_atomic(dir / "magic.ck", bytes);
  EXPECT_EQ(error_kind_of([&] { load_container(dir / "magic.ck", "test"); }), ErrorKind::kSchema);
  EXPECT_EQ(error_kind_of([&] { load_container(dir / "none.ck", "test"); }), ErrorKind::kLoad);
}

TEST(ErrorCategory, StableStrings) {
  EXPECT_EQ(error_category(ErrorKind::kConfig), "config-invalid");
  EXPECT_EQ(error_category(ErrorKind::kConfigNotFound), "config-not-found");
  EXPECT_EQ(error_category(ErrorKind::kProtocol), "protocol-violation");
  EXPECT_EQ(error_category(ErrorKind::kEmptyScores), "empty-scores");
}

}  // namespace
}  // namespace sarfsl
