#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "dhnplan/csv.hpp"
#include "dhnplan/error.hpp"
#include "dhnplan/thermal_network.hpp"
#include "test_support.hpp"

using namespace dhnplan;
using dhnplan::testing::copy_fixture;
using dhnplan::testing::fixtures;
using dhnplan::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

// Replaces the first occurrence of `from` in the file.
void patch(const std::filesystem::path& p, const std::string& from, const std::string& to) {
  auto s = slurp(p);
  auto pos = s.find(from);
  ASSERT_NE(pos, std::string::npos) << from;
  s.replace(pos, from.size(), to);
  spit(p, s);
}

}  // namespace

TEST(LoadHeatSystem, Toy2Fixture) {
  auto sys = load_heat_system(fixtures() / "toy2");
  EXPECT_EQ(sys.nodes.size(), 2u);
  EXPECT_EQ(sys.assets.size(), 5u);
  EXPECT_EQ(sys.snapshots.size(), 168u);
  EXPECT_NEAR(sys.snapshots.horizon_hours(), 8760.0, 1e-9);
  EXPECT_EQ(sys.nodes[0].electric_bus, "B7");
  const auto* pipe = sys.find_asset("pipe_A_B");
  ASSERT_NE(pipe, nullptr);
  EXPECT_EQ(pipe->to_node, "B");
  EXPECT_DOUBLE_EQ(pipe->length_m, 2000.0);
  const auto* st = sys.find_asset("st_B");
  ASSERT_NE(st, nullptr);
  EXPECT_EQ(st->availability.size(), 168u);
}

TEST(LoadHeatSystem, Heat5Fixture) {
  auto sys = load_heat_system(fixtures() / "heat5");
  EXPECT_EQ(sys.nodes.size(), 5u);
  EXPECT_EQ(sys.assets.size(), 21u);
  EXPECT_DOUBLE_EQ(sys.cop.a1, -0.121);
  auto cop = sys.cop_series();
  EXPECT_EQ(cop.size(), sys.snapshots.size());
  const auto* ates = sys.find_asset("ates_N3");
  ASSERT_NE(ates, nullptr);
  EXPECT_NEAR(ates->standing_loss, 1.0 - std::exp(-1.0 / 24.0), 1e-15);
  EXPECT_DOUBLE_EQ(ates->efficiency_discharge, 0.7);
  EXPECT_DOUBLE_EQ(ates->efficiency_charge, 1.0);
  EXPECT_DOUBLE_EQ(*ates->spf, 50.0);
}

TEST(LoadHeatSystem, RoundTripAllFixtures) {
  for (const char* name : {"toy2", "heat5"}) {
    TempDir tmp;
    auto a = load_heat_system(fixtures() / name);
    save_heat_system(a, tmp.path() / name);
    auto b = load_heat_system(tmp.path() / name);
    EXPECT_TRUE(a == b) << name;
  }
}

TEST(LoadHeatSystem, RoundTripWithDemandScale) {
  TempDir tmp;
  LoadOptions opt;
  opt.demand_scale = 1.2;
  auto a = load_heat_system(fixtures() / "toy2", opt);
  save_heat_system(a, tmp.path() / "s");
  auto b = load_heat_system(tmp.path() / "s", opt);
  ASSERT_EQ(a.nodes.size(), b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i)
    for (std::size_t t = 0; t < a.snapshots.size(); ++t)
      EXPECT_NEAR(a.nodes[i].demand[t], b.nodes[i].demand[t], 1e-12);
}

TEST(LoadHeatSystem, DemandScaleMultiplies) {
  auto base = load_heat_system(fixtures() / "toy2");
  LoadOptions opt;
  opt.demand_scale = 0.8;
  auto scaled = load_heat_system(fixtures() / "toy2", opt);
  EXPECT_NEAR(scaled.annual_heat_demand(), 0.8 * base.annual_heat_demand(),
              1e-9 * base.annual_heat_demand());
  EXPECT_DOUBLE_EQ(scaled.demand_scale, 0.8);
}

TEST(LoadHeatSystem, WeatherVariant) {
  LoadOptions opt;
  opt.weather_variant = "1987";
  auto cold = load_heat_system(fixtures() / "heat5", opt);
  auto base = load_heat_system(fixtures() / "heat5");
  EXPECT_NE(cold.weather.ambient_temperature, base.weather.ambient_temperature);
  opt.weather_variant = "1850";
  EXPECT_THROW(load_heat_system(fixtures() / "heat5", opt), ValidationError);
}

TEST(LoadHeatSystem, AvailabilityOutOfRangeNamesRecord) {
  TempDir tmp;
  auto dir = copy_fixture("heat5", tmp);
  patch(dir / "series" / "availability.csv", "2015-04-13T00:00,0.35", "2015-04-13T00:00,1.2");
  try {
    load_heat_system(dir);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    std::string what = e.what();
    EXPECT_NE(what.find("asset rh_N3"), std::string::npos) << what;
    EXPECT_NE(what.find("availability.csv:2"), std::string::npos) << what;
  }
}

TEST(LoadHeatSystem, DemandLengthMismatch) {
  TempDir tmp;
  auto dir = copy_fixture("toy2", tmp);
  auto text = slurp(dir / "series" / "demand.csv");
  text.erase(text.rfind('\n', text.size() - 2) + 1);  // drop the last record
  spit(dir / "series" / "demand.csv", text);
  try {
    load_heat_system(dir);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    std::string what = e.what();
    EXPECT_NE(what.find("length mismatch"), std::string::npos) << what;
    EXPECT_NE(what.find("demand.csv"), std::string::npos) << what;
  }
}

TEST(LoadHeatSystem, DanglingNodeReference) {
  TempDir tmp;
  auto dir = copy_fixture("toy2", tmp);
  patch(dir / "assets.csv", "st_B,B,", "st_B,Z,");
  EXPECT_THROW(load_heat_system(dir), ValidationError);
}

TEST(LoadHeatSystem, MissingFile) {
  TempDir tmp;
  auto dir = copy_fixture("toy2", tmp);
  std::filesystem::remove(dir / "nodes.csv");
  EXPECT_THROW(load_heat_system(dir), ValidationError);
}

TEST(LoadHeatSystem, NegativeDemandRejected) {
  TempDir tmp;
  auto dir = copy_fixture("toy2", tmp);
  auto text = slurp(dir / "series" / "demand.csv");
  auto line = text.find("2015-04-13T03:00,");
  auto comma = text.find(',', line);
  text.insert(comma + 1, "-");
  spit(dir / "series" / "demand.csv", text);
  EXPECT_THROW(load_heat_system(dir), ValidationError);
}

TEST(LoadHeatSystem, PipelineTotalLossRejected) {
  TempDir tmp;
  auto dir = copy_fixture("toy2", tmp);
  patch(dir / "assets.csv", ",B,2000", ",B,20000000");
  EXPECT_THROW(load_heat_system(dir), ValidationError);
}

TEST(BusMapping, ValidatesAgainstGridBuses) {
  auto sys = load_heat_system(fixtures() / "toy2");
  EXPECT_NO_THROW(validate_bus_mapping(sys, {"B4", "B7"}));
  EXPECT_THROW(validate_bus_mapping(sys, {"B4"}), ValidationError);
}

TEST(Annuity, ClosedForm) {
  // Independent evaluation through pow rather than expm1/log1p.
  auto oracle = [](double n, double r) { return (1.0 - std::pow(1.0 + r, -n)) / r; };
  EXPECT_NEAR(annuity_factor(15, 0.07), 9.10791, 1e-5);
  EXPECT_NEAR(annuity_factor(15, 0.07), oracle(15, 0.07), 1e-12);
  EXPECT_NEAR(annuity_factor(1, 0.07), 1.0 / 1.07, 1e-12);
  EXPECT_NEAR(annuity_factor(1, 0.07), 0.93458, 1e-5);
  EXPECT_DOUBLE_EQ(annuity_factor(15, 0.0), 15.0);
}

TEST(Annuity, ContinuousAtZeroRate) {
  for (double n : {1.0, 15.0, 30.0, 80.0})
    EXPECT_LT(std::abs(annuity_factor(n, 1e-9) - n), 1e-6 * n) << n;
}

TEST(Annuity, DomainErrors) {
  EXPECT_THROW(annuity_factor(0.5, 0.07), DomainError);
  EXPECT_THROW(annuity_factor(15, -0.01), DomainError);
}

TEST(HeatPumpCop, PublishedCoefficients) {
  EXPECT_EQ(heat_pump_cop(0.0), 6.81);
  EXPECT_NEAR(heat_pump_cop(50.0), 6.81 + 0.121 * 50 + 0.00063 * 2500, 1e-12);
  EXPECT_NEAR(heat_pump_cop(50.0), 14.435, 1e-9);
}

TEST(HeatPumpCop, Override) {
  CopCoefficients c{6.81, -0.121, 0.000630};
  EXPECT_NEAR(heat_pump_cop(50.0, c), 2.335, 1e-9);
}

TEST(HeatPumpCop, NonPhysicalRejected) {
  EXPECT_THROW(heat_pump_cop(0.0, CopCoefficients{1.0, 0.0, 0.0}), ConfigurationError);
  EXPECT_THROW(heat_pump_cop(60.0, CopCoefficients{2.0, -0.05, 0.0}), ConfigurationError);
}

TEST(HeatPumpCop, SeriesLengthMatchesSnapshots) {
  auto sys = load_heat_system(fixtures() / "toy2");
  EXPECT_EQ(sys.cop_series().size(), sys.snapshots.size());
}
