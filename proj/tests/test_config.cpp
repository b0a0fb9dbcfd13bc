#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "exolim/config.hpp"
#include "exolim/io.hpp"

using namespace exolim;

namespace {

std::string error_of(const nlohmann::json& j) {
  try {
    config_from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, EmptyObjectGivesTheDefaults) {
  const auto c = config_from_json(nlohmann::json::object());
  EXPECT_DOUBLE_EQ(c.geometry.sphere.radius, 978e-6);
  EXPECT_DOUBLE_EQ(c.geometry.kinematics.min_gap, 9.3e-6);
  EXPECT_EQ(c.mc.pair_count, 1u << 20);
  EXPECT_EQ(c.mc.time_samples, 64);
  EXPECT_EQ(c.budget_rows.size(), 9u);
  EXPECT_EQ(c.seed, 20220521u);
  EXPECT_EQ(c.confidence.sidedness, Sidedness::two_sided);
}

TEST(Config, EmptyFileGivesTheDefaults) {
  const auto path = std::filesystem::temp_directory_path() / "exolim_empty_config.json";
  std::ofstream(path) << "\n";
  const auto c = load_config(path.string());
  EXPECT_DOUBLE_EQ(c.geometry.kinematics.amplitude, 718e-9);
  std::filesystem::remove(path);
}

TEST(Config, UnitSuffixesConvertToSI) {
  EXPECT_DOUBLE_EQ(parse_quantity("9.3um", Dimension::length), 9.3e-6);
  EXPECT_DOUBLE_EQ(parse_quantity("1.953kHz", Dimension::frequency), 1953.0);
  EXPECT_DOUBLE_EQ(parse_quantity("718nm", Dimension::length), 718e-9);
  EXPECT_NEAR(parse_quantity("54.7deg", Dimension::angle), 0.954695, 1e-6);
  EXPECT_DOUBLE_EQ(parse_quantity("0.5pT", Dimension::field), 0.5e-12);
  EXPECT_DOUBLE_EQ(parse_quantity("291.9h", Dimension::time), 291.9 * 3600.0);
  EXPECT_DOUBLE_EQ(parse_quantity("1.4nT/rtHz", Dimension::asd), 1.4e-9);
  EXPECT_THROW(parse_quantity("9.3furlong", Dimension::length), std::invalid_argument);
  EXPECT_THROW(parse_quantity("9.3kHz", Dimension::length), std::invalid_argument);
  EXPECT_THROW(parse_quantity("um", Dimension::length), std::invalid_argument);
}

TEST(Config, ValuesAreApplied) {
  const auto c = config_from_json({{"d0", "12um"}, {"frequency", "2kHz"}, {"pair_count", 65536},
                                   {"cl_convention", "one_sided"}, {"seed", 7}});
  EXPECT_DOUBLE_EQ(c.geometry.kinematics.min_gap, 12e-6);
  EXPECT_DOUBLE_EQ(c.chain.reference_frequency, 2000.0);
  EXPECT_EQ(c.mc.pair_count, 65536u);
  EXPECT_EQ(c.confidence.sidedness, Sidedness::one_sided);
  EXPECT_EQ(c.mc.seed, 7u);
  EXPECT_EQ(c.noise.seed, 7u);
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_NE(error_of({{"d0", "-1um"}}).find("'d0'"), std::string::npos);
  EXPECT_NE(error_of({{"radius", "1kHz"}}).find("'radius'"), std::string::npos);
  EXPECT_NE(error_of({{"typo_key", 1}}).find("'typo_key'"), std::string::npos);
  EXPECT_NE(error_of({{"pair_count", 0}}).find("'pair_count'"), std::string::npos);
  EXPECT_NE(error_of({{"scheme", "grid"}}).find("'scheme'"), std::string::npos);
  EXPECT_NE(error_of({{"budget_rows", {{{"name", "x"}, {"kind", "calibration"}, {"bogus", 1}}}}}).find("budget_rows[0].bogus"),
            std::string::npos);
  EXPECT_NE(error_of({{"lambda_min", "1mm"}, {"lambda_max", "10um"}}).find("'lambda_max'"), std::string::npos);
}

TEST(Config, BudgetRowsCanBeReplaced) {
  const auto c = config_from_json(
      {{"budget_rows",
        {{{"name", "Angle"}, {"kind", "kernel"}, {"target", "theta"}, {"mean", "54.7deg"}, {"sigma", "2deg"}},
         {{"name", "Offset"}, {"kind", "field_offset"}, {"mean", "0.5pT"}}}}});
  ASSERT_EQ(c.budget_rows.size(), 2u);
  EXPECT_EQ(c.budget_rows[0].target, KernelTarget::nv_angle);
  EXPECT_NEAR(c.budget_rows[0].sigma, degrees(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(c.budget_rows[1].mean, 0.5e-12);
}

TEST(Config, SlopeCanDriveTheCalibration) {
  const auto c = config_from_json({{"calibration_from_slope", true}, {"calibration_slope", "0.816V/MHz"}});
  EXPECT_NEAR(c.chain.calibration_constant, 0.816e-6 * 28e9, 1e-6);
}

TEST(Config, ResolvedConfigRoundTripsThroughProvenance) {
  auto c = config_from_json({{"pair_count", 65536}});
  const Provenance p{"test", to_json(c), c.seed};
  std::ostringstream out;
  write_json(out, {{"x", 1.5}}, p);
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j["provenance"]["config"]["pair_count"], 65536);
  EXPECT_EQ(j["provenance"]["seed"], 20220521);
  EXPECT_FALSE(j["provenance"]["config"].contains("threads"));
}

TEST(Io, NumbersRoundTripExactly) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-22, 6.02214076e23}) {
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

TEST(Io, CsvCarriesProvenanceAndHeader) {
  CsvTable t{{"a", "b"}, {}};
  t.add({1.0, 2.0});
  std::ostringstream out;
  write_csv(out, t, Provenance{"test", nlohmann::json::object(), 3});
  const std::string s = out.str();
  EXPECT_EQ(s.rfind("# provenance: ", 0), 0u);
  EXPECT_NE(s.find("\na,b\n1,2\n"), std::string::npos);
  t.rows.push_back({"1"});
  EXPECT_THROW(write_csv(out, t, Provenance{}), std::logic_error);
}
