#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <vector>

#include "panfuse/grid.hpp"

using namespace panfuse;
using Catch::Approx;

TEST_CASE("grid spec validation") {
  GridSpec ok{0.0, 1.0, 16};
  REQUIRE_NOTHROW(ok.validate());
  REQUIRE(ok.step() == Approx(1.0 / 15.0));
  REQUIRE(ok.point(0) == 0.0);
  REQUIRE(ok.point(15) == Approx(1.0));

  REQUIRE_THROWS_AS((GridSpec{0.0, 1.0, 15}.validate()), std::invalid_argument);
  REQUIRE_THROWS_AS((GridSpec{1.0, 1.0, 16}.validate()), std::invalid_argument);
  REQUIRE_THROWS_AS((GridSpec{2.0, 1.0, 16}.validate()), std::invalid_argument);
}

TEST_CASE("make_grid with zero padding spans the sample range") {
  const std::vector<double> samples{1.0, 2.0};
  const GridSpec grid = make_grid(samples, 16, 0.0);
  REQUIRE(grid.start == Approx(1.0).margin(1e-12));
  REQUIRE(grid.end == Approx(2.0).margin(1e-12));
}

TEST_CASE("make_grid step is equidistant") {
  const std::vector<double> samples{0.0, 1.0};
  const GridSpec grid = make_grid(samples, 21, 0.0);
  REQUIRE(grid.count == 21);
  REQUIRE(grid.step() == Approx(0.05).margin(1e-15));
}

TEST_CASE("make_grid covers every sample") {
  std::mt19937 rng(11);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> samples(1000);
  for (double& s : samples) s = dist(rng);
  const GridSpec grid = make_grid(samples, 256, 3.0);
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  REQUIRE(grid.start <= *lo);
  REQUIRE(grid.end >= *hi);
}

TEST_CASE("make_grid rejects degenerate input") {
  const std::vector<double> one{1.0};
  const std::vector<double> constant{2.0, 2.0, 2.0};
  const std::vector<double> two{1.0, 2.0};
  REQUIRE_THROWS_AS(make_grid(one, 16, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(make_grid(constant, 16, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(make_grid(two, 8, 0.0), std::invalid_argument);
}

TEST_CASE("linear binning puts on-grid samples in a single bin") {
  const GridSpec grid{0.0, 1.5, 16};
  const std::vector<double> samples{grid.point(4)};
  const BinnedSample binned = linear_binning(samples, grid);
  REQUIRE(binned.counts[4] == Approx(1.0).margin(1e-12));
  for (int j = 0; j < 16; ++j)
    if (j != 4) REQUIRE(binned.counts[j] == 0.0);
}

TEST_CASE("linear binning splits midway samples evenly") {
  const GridSpec grid{0.0, 1.5, 16};
  const std::vector<double> samples{0.5 * (grid.point(6) + grid.point(7))};
  const BinnedSample binned = linear_binning(samples, grid);
  REQUIRE(binned.counts[6] == Approx(0.5).margin(1e-12));
  REQUIRE(binned.counts[7] == Approx(0.5).margin(1e-12));
}

TEST_CASE("linear binning conserves mass") {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> dist(-2.0, 5.0);
  std::vector<double> samples(1000);
  for (double& s : samples) s = dist(rng);
  const GridSpec grid{-2.0, 5.0, 512};
  const BinnedSample binned = linear_binning(samples, grid);
  double total = 0.0;
  for (const double c : binned.counts) total += c;
  REQUIRE(total == Approx(1000.0).margin(1e-9));
  REQUIRE(binned.sample_count == 1000);
}

TEST_CASE("linear binning rejects out-of-range samples") {
  const GridSpec grid{0.0, 1.0, 16};
  const std::vector<double> above{1.5};
  const std::vector<double> below{-0.1};
  REQUIRE_THROWS_AS(linear_binning(above, grid), std::out_of_range);
  REQUIRE_THROWS_AS(linear_binning(below, grid), std::out_of_range);
}

TEST_CASE("grid endpoints bin correctly") {
  const GridSpec grid{0.0, 1.0, 16};
  const std::vector<double> samples{0.0, 1.0};
  const BinnedSample binned = linear_binning(samples, grid);
  REQUIRE(binned.counts.front() == Approx(1.0).margin(1e-12));
  REQUIRE(binned.counts.back() == Approx(1.0).margin(1e-12));
}

TEST_CASE("silverman bandwidth is positive and scales with spread") {
  std::mt19937 rng(17);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> samples(500), wide(500);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = dist(rng);
    wide[i] = 3.0 * samples[i];
  }
  const double h = silverman_bandwidth(samples);
  const double h_wide = silverman_bandwidth(wide);
  REQUIRE(h > 0.0);
  REQUIRE(h_wide == Approx(3.0 * h).epsilon(1e-9));
}
