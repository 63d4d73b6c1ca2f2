#include <gtest/gtest.h>

#include <filesystem>

#include "ihtp/error.hpp"
#include "ihtp/io.hpp"
#include "ihtp/run_manifest.hpp"

namespace ihtp {
namespace {

TEST(KeyValue, ParsesCommentsAndLaterAssignmentsWin) {
  const auto c = KeyValueConfig::parse("# header\nnoise = 5\nnf=18  # trailing\n\nnoise = 10\nname = ann eks\n");
  EXPECT_DOUBLE_EQ(c.get_double("noise", 0.0), 10.0);
  EXPECT_EQ(c.get_int("nf", 0), 18);
  EXPECT_EQ(c.get_or("name", ""), "ann eks");
  EXPECT_FALSE(c.has("missing"));
  EXPECT_EQ(c.get_int("missing", 7), 7);
}

TEST(KeyValue, RejectsMalformedLinesAndValues) {
  EXPECT_THROW(KeyValueConfig::parse("no equals sign"), Error);
  EXPECT_THROW(KeyValueConfig::parse(" = 3"), Error);
  const auto c = KeyValueConfig::parse("x = abc\nb = maybe");
  EXPECT_THROW(c.get_double("x", 0.0), Error);
  EXPECT_THROW(c.get_bool("b", false), Error);
}

TEST(KeyValue, MergeAndUnknownKeys) {
  auto base = KeyValueConfig::parse("a = 1\nb = 2");
  base.merge(KeyValueConfig::parse("b = 3\nc = true"));
  EXPECT_EQ(base.get_int("b", 0), 3);
  EXPECT_TRUE(base.get_bool("c", false));
  EXPECT_EQ(base.unknown_keys({"a", "b"}), std::vector<std::string>{"c"});
}

TEST(Manifest, HashIgnoresHostAndTimestamps) {
  auto a = start_manifest("invert", {{"noise", 5}});
  a.seeds["noise"] = 11;
  auto b = a;
  b.host = {{"name", "elsewhere"}};
  b.started_at = "2000-01-01T00:00:00Z";
  b.finished_at = "2000-01-01T00:00:01Z";
  EXPECT_EQ(a.content_hash(), b.content_hash());
  b.seeds["noise"] = 12;
  EXPECT_NE(a.content_hash(), b.content_hash());
}

TEST(Manifest, JsonRoundTripAndSidecar) {
  auto m = start_manifest("simulate", {{"flux", "builtin-test"}});
  m.input_hashes["flux"] = io::fnv1a_hex("abc");
  m.finished_at = utc_timestamp();
  const auto back = RunManifest::from_json(m.to_json());
  EXPECT_EQ(back.content_hash(), m.content_hash());
  EXPECT_EQ(back.tool_version, library_version());
  const auto out = std::filesystem::temp_directory_path() / "ihtp_output.csv";
  const auto side = m.write_next_to(out);
  EXPECT_EQ(side.filename(), "ihtp_output.csv.manifest.json");
  EXPECT_EQ(RunManifest::from_json(io::read_json(side)).content_hash(), m.content_hash());
  std::filesystem::remove(side);
}

}  // namespace
}  // namespace ihtp
