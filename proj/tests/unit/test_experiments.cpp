#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <set>
#include <stdexcept>

#include "ihtp/error.hpp"
#include "ihtp/experiments.hpp"
#include "ihtp/io.hpp"

namespace ihtp {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

TEST(Stats, Median) {
  EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_THROW(median({}), Error);
}

TEST(Stats, FitLineRecoversExactLine) {
  const std::vector<double> x{0, 1, 2, 3, 4}, y{1.5, 3.5, 5.5, 7.5, 9.5};
  const auto f = fit_line(x, y);
  EXPECT_NEAR(f.intercept, 1.5, 1e-12);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
}

TEST(Stats, FitLineR2BelowOneForScatter) {
  const std::vector<double> x{0, 1, 2, 3}, y{0.0, 1.2, 1.8, 3.1};
  const auto f = fit_line(x, y);
  EXPECT_GT(f.r2, 0.9);
  EXPECT_LT(f.r2, 1.0);
}

TEST(Parallel, RunsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(57);
  parallel_for(4, hits.size(), [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Parallel, RethrowsFirstFailure) {
  EXPECT_THROW(parallel_for(3, 10,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(Store, PersistsAcrossInstances) {
  const auto dir = fresh_dir("ihtp_store_test");
  {
    ResultStore store(dir);
    EXPECT_FALSE(store.find("abc").has_value());
    store.put("abc", {{"ae", 0.5}});
  }
  ResultStore reopened(dir);
  const auto v = reopened.find("abc");
  ASSERT_TRUE(v.has_value());
  EXPECT_DOUBLE_EQ((*v)["ae"].get<double>(), 0.5);
  fs::remove_all(dir);
}

TEST(Store, MemoryOnlyWithoutDirectory) {
  ResultStore store;
  store.put("k", {{"x", 1}});
  EXPECT_TRUE(store.find("k").has_value());
}

TEST(Exclusions, FifteenDistinctSets) {
  const auto sets = standard_exclusions();
  ASSERT_EQ(sets.size(), 15u);
  EXPECT_TRUE(sets[0].empty());
  std::set<std::set<std::string>> unique;
  std::size_t singles = 0, pairs = 0, triples = 0;
  for (const auto& s : sets) {
    unique.insert(std::set<std::string>(s.begin(), s.end()));
    singles += s.size() == 1;
    pairs += s.size() == 2;
    triples += s.size() == 3;
  }
  EXPECT_EQ(unique.size(), 15u);
  EXPECT_EQ(singles, 4u);
  EXPECT_EQ(pairs, 6u);
  EXPECT_EQ(triples, 4u);
}

TEST(Sweep, CellsAreInteriorAndStrided) {
  const Mesh mesh;
  const auto all = sweep_cells(mesh, 1);
  EXPECT_EQ(all.size(), static_cast<std::size_t>((mesh.nx - 2) * (mesh.ny - 2)));
  for (const auto& c : sweep_cells(mesh, 2)) {
    EXPECT_GE(c.i, 1);
    EXPECT_LE(c.i, mesh.nx - 2);
    EXPECT_GE(c.j, 1);
    EXPECT_LE(c.j, mesh.ny - 2);
  }
  EXPECT_LT(sweep_cells(mesh, 2).size(), all.size());
}

TEST(Sweep, SpecValidation) {
  SweepSpec s;
  s.seeds.clear();
  EXPECT_THROW(s.validate(), Error);
  s = SweepSpec{};
  s.exclusions = {{"cosine"}};
  EXPECT_THROW(s.validate(), Error);
  s = SweepSpec{};
  s.noise_levels = {-1.0};
  EXPECT_THROW(s.validate(), Error);
}

TEST(Replicates, JsonRoundTripKeepsNonFiniteAsNan) {
  Replicate r;
  r.labels = {{"set", "3"}};
  r.seed = 2;
  r.ae = std::nan("");
  r.divergent = true;
  r.metrics = {{"ae_step", 0.25}};
  r.error = "diverged";
  const auto back = Replicate::from_json(nlohmann::json::parse(r.to_json().dump()));
  EXPECT_TRUE(std::isnan(back.ae));
  EXPECT_EQ(back.labels, r.labels);
  EXPECT_EQ(back.metrics, r.metrics);
  EXPECT_EQ(back.error, r.error);
  EXPECT_TRUE(back.divergent);
}

TEST(Replicates, LongFormatCsv) {
  Replicate a, b;
  a.labels = {{"noise", "2"}};
  a.seed = 1;
  a.ae = 0.1;
  b.labels = {{"noise", "5"}};
  b.seed = 2;
  b.ae = 0.2;
  const auto path = fs::temp_directory_path() / "ihtp_replicates.csv";
  const std::vector<Replicate> rows{a, b};
  write_replicates_csv(path, rows);
  const auto t = io::read_csv(path);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.header.front(), "noise");
  EXPECT_DOUBLE_EQ(t.number(1, t.column("AE")), 0.2);
  fs::remove(path);
}

TEST(FamilyErrors, NormalizesPerSection) {
  InversionResult r;
  r.steps = {0, 1, 2, 3};
  r.q_true = {100.0, 100.0, 1000.0, 1000.0};
  r.q_hat = {110.0, 90.0, 1100.0, 900.0};
  const std::vector<RenderedSignal::Section> sections{{"a", 0, 2}, {"b", 2, 4}};
  const auto e = family_errors(r, sections);
  EXPECT_NEAR(e.at("a"), 0.1, 1e-12);
  EXPECT_NEAR(e.at("b"), 0.1, 1e-12);
}

}  // namespace
}  // namespace ihtp
