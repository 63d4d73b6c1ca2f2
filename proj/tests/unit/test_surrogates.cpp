#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "ihtp/error.hpp"
#include "ihtp/surrogates.hpp"

namespace ihtp {
namespace {

SignalManifest short_corpus() {
  SignalManifest m;
  m.name = "short";
  m.segments.push_back({FluxKind::Sinusoidal, 1.5, 1500.0, 2500.0, 1.0, {}});
  m.segments.push_back({FluxKind::Step, 0.5, 3500.0, 0.0, 0.0, {}});
  return m;
}

SurrogateConfig quick_config(int candidates) {
  SurrogateConfig c;
  c.transfer.train.max_iterations = 15;
  c.sensitivity.train.max_iterations = 5;
  c.selection.candidates = candidates;
  return c;
}

const PhysicalParams kParams;
const Mesh kMesh;
const CellIndex kSensorCell{20, 44};

TEST(Surrogates, SelectsLowestClosedLoopCandidate) {
  const SurrogatePair pair = train_surrogates(short_corpus(), kMesh, kParams, kSensorCell, quick_config(3));
  ASSERT_EQ(pair.candidates.size(), 3u);
  const auto best = std::min_element(pair.candidates.begin(), pair.candidates.end(),
                                     [](const auto& a, const auto& b) { return a.ae < b.ae; });
  EXPECT_EQ(pair.transfer.metadata.at("fit").at("train").at("seed").get<std::uint64_t>(), best->seed);
  EXPECT_EQ(pair.candidates.front().seed, SurrogateConfig{}.transfer.train.seed);
  EXPECT_EQ(pair.transfer.manifest_hash, pair.sensitivity.manifest_hash);
  EXPECT_GT(pair.training_seconds, 0.0);
  EXPECT_GT(pair.transfer_report.seconds, 0.0);
}

TEST(Surrogates, CacheRoundTripAndMissingModel) {
  const auto dir = std::filesystem::temp_directory_path() / "ihtp_surrogate_cache";
  std::filesystem::remove_all(dir);
  const auto config = quick_config(1);
  EXPECT_THROW(load_or_train_surrogates(dir, short_corpus(), kMesh, kParams, kSensorCell, config, false), Error);
  const auto trained = load_or_train_surrogates(dir, short_corpus(), kMesh, kParams, kSensorCell, config);
  EXPECT_TRUE(std::filesystem::exists(surrogate_path(dir, short_corpus(), kMesh, kParams, kSensorCell, config)));
  const auto loaded = load_or_train_surrogates(dir, short_corpus(), kMesh, kParams, kSensorCell, config, false);
  EXPECT_EQ(loaded.transfer.parameters(), trained.transfer.parameters());
  EXPECT_EQ(loaded.candidates.size(), 1u);
  EXPECT_DOUBLE_EQ(loaded.training_seconds, trained.training_seconds);
  std::filesystem::remove_all(dir);
}

TEST(Surrogates, KeyTracksSelectionSettings) {
  auto a = quick_config(2), b = quick_config(3);
  EXPECT_NE(surrogate_key(short_corpus(), kMesh, kParams, kSensorCell, a),
            surrogate_key(short_corpus(), kMesh, kParams, kSensorCell, b));
  EXPECT_THROW(train_surrogates(short_corpus(), kMesh, kParams, kSensorCell, quick_config(0)), Error);
}

}  // namespace
}  // namespace ihtp
