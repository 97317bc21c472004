#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "nesskubo/runner.hpp"

using namespace nesskubo;

namespace {

const char* kConductivity = R"(
command = conductivity   # trailing comment
[lattice]
dimension = 1
half_width = 20
[thermo]
beta = inf
mu = 0
lambda = 0.5
)";

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(ParseConfig, BasicFile) {
  const auto cfg = parse_config(kConductivity);
  EXPECT_EQ(cfg.command, Command::conductivity);
  EXPECT_EQ(cfg.lattice.half_width, 20);
  EXPECT_TRUE(cfg.thermo.zero_temperature());
  EXPECT_EQ(cfg.thermo.lambda, 0.5);
  EXPECT_EQ(cfg.lattice.boundary, Boundary::open);
}

TEST(ParseConfig, EmptyFileListsRequiredKeys) {
  const std::string err = error_of("");
  EXPECT_NE(err.find("missing required keys"), std::string::npos);
  for (const char* key : {"command", "thermo.beta", "thermo.mu", "thermo.lambda"})
    EXPECT_NE(err.find(key), std::string::npos) << key;
}

TEST(ParseConfig, RejectsUnknownKeysWithLineNumber) {
  const std::string err = error_of(std::string(kConductivity) + "[thermo]\ntemperature = 3\n");
  EXPECT_NE(err.find("unknown key 'temperature'"), std::string::npos);
  EXPECT_NE(err.find("line 11"), std::string::npos);
  EXPECT_NE(error_of("[bogus]\nx = 1\n").find("unknown key"), std::string::npos);
}

TEST(ParseConfig, RejectsZeroDamping) {
  std::string text = kConductivity;
  text.replace(text.find("lambda = 0.5"), 12, "lambda = 0");
  EXPECT_NE(error_of(text).find("lambda"), std::string::npos);
}

TEST(ParseConfig, RejectsMalformedValues) {
  std::string text = kConductivity;
  EXPECT_NE(error_of(text + "[measure]\ndirection = x\n").find("integer"), std::string::npos);
  EXPECT_NE(error_of(text + "[measure]\ndirection = 2\n").find("direction"), std::string::npos);
  EXPECT_NE(error_of(text + "[lattice]\nboundary = twisted\n").find("boundary"), std::string::npos);
  EXPECT_NE(error_of(text + "[thermo]\nfield = 0.1.2\n").find("number"), std::string::npos);
  EXPECT_NE(error_of("command = nothing\n").find("unknown value"), std::string::npos);
  EXPECT_NE(error_of("just text\n").find("key = value"), std::string::npos);
  EXPECT_NE(error_of(text + "[lattice]\ndimension = 2\n").find("duplicate"), std::string::npos);
}

TEST(ParseConfig, BandsNeedPeriodicPotential) {
  EXPECT_NE(error_of("command = bands\n[potential]\nkind = zero\nperiods = 1\nvalues = 0\n[bloch]\nk_grid = 8\n")
                .find("periodic"),
            std::string::npos);
  EXPECT_NE(error_of("command = bands\n[potential]\nkind = periodic\nperiods = 2\nvalues = 0\n[bloch]\nk_grid = 8\n")
                .find("cell values"),
            std::string::npos);
  EXPECT_NO_THROW(parse_config("command = bands\n[potential]\nkind = periodic\nperiods = 2\nvalues = 1 -1\n[bloch]\nk_grid = 8\n"));
}

TEST(ParseConfig, SweepRangeExpands) {
  const auto cfg = parse_config(std::string(kConductivity) +
                                "[sweep]\naxis = lambda\ntarget = conductivity\nstart = 0.1\nstop = 0.4\nstep = 0.1\n",
                                Command::sweep);
  ASSERT_EQ(cfg.sweep.values.size(), 4u);
  EXPECT_DOUBLE_EQ(cfg.sweep.values.back(), 0.4);
  EXPECT_NE(error_of(std::string(kConductivity) + "[sweep]\nstart = 1\nstop = 0\nstep = 0.1\n"), "");
}

TEST(ParseConfig, SweptKeyMayBeOmitted) {
  const auto cfg = parse_config(
      "command = sweep\n[lattice]\ndimension = 1\nhalf_width = 5\n[thermo]\nbeta = 1\nmu = 0\nlambda = 0.5\n"
      "[sweep]\naxis = E\ntarget = current\nvalues = 0.1 0.2\n");
  EXPECT_EQ(cfg.sweep.axis, SweepAxis::field);
}

TEST(ParseConfig, CommandArgumentOverrides) {
  const auto cfg = parse_config(std::string(kConductivity) + "[thermo]\nfield = 0.1\n", Command::current);
  EXPECT_EQ(cfg.command, Command::current);
}

TEST(EmitConfig, RoundTrip) {
  const auto cfg = parse_config(kConductivity);
  EXPECT_EQ(parse_config(emit_config(cfg)), cfg);
}

TEST(EmitConfig, RoundTripRandomized) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    RunConfig cfg;
    cfg.command = trial % 3 == 0 ? Command::bloch_conductivity : (trial % 3 == 1 ? Command::ness : Command::sweep);
    cfg.lattice = {1 + static_cast<int>(rng() % 2), 1 + static_cast<int>(rng() % 40),
                   rng() % 2 ? Boundary::open : Boundary::periodic};
    cfg.thermo = {trial % 4 ? std::exp(u(rng)) : kInfinity, u(rng), std::exp(u(rng)), u(rng) / 7};
    cfg.potential.kind = PotentialKind::periodic;
    cfg.potential.periods.assign(static_cast<std::size_t>(cfg.lattice.dimension), 2);
    cfg.potential.values.clear();
    for (int i = 0; i < (cfg.lattice.dimension == 1 ? 2 : 4); ++i) cfg.potential.values.push_back(u(rng) / 3);
    cfg.k_grid.assign(static_cast<std::size_t>(cfg.lattice.dimension), 4 + static_cast<int>(rng() % 20));
    cfg.field_step = std::exp(u(rng)) * 1e-5;
    cfg.convergence_check = rng() % 2;
    cfg.dispersion = rng() % 2 ? Dispersion::cosine(std::exp(u(rng))) : Dispersion::quadratic();
    cfg.sweep = {SweepAxis::mu, Command::current, {u(rng), u(rng), 1.0 / 3.0}};
    cfg.output_path = trial % 2 ? "out.csv" : "";
    cfg.format = trial % 2 ? OutputFormat::json : OutputFormat::csv;
    validate_config(cfg);
    const auto back = parse_config(emit_config(cfg));
    EXPECT_EQ(back, cfg) << emit_config(cfg);
  }
}

TEST(Run, ConductivityRowEchoesInputs) {
  auto cfg = parse_config(kConductivity);
  const auto table = run(cfg);
  ASSERT_EQ(table.size(), 1u);
  const auto& row = table.front();
  EXPECT_EQ(std::get<std::string>(row["command"]), "conductivity");
  EXPECT_EQ(row.number("half_width"), 20.0);
  EXPECT_TRUE(std::isinf(row.number("beta")));
  EXPECT_NEAR(row.number("sigma_finite_difference") / row.number("sigma_kubo"), 1.0, 1e-5);
}

TEST(Run, SweepOrderIndependentOfThreads) {
  auto cfg = parse_config(
      "command = sweep\n[lattice]\ndimension = 1\nhalf_width = 15\n[thermo]\nbeta = 3\nmu = 0\nlambda = 0.5\n"
      "[sweep]\naxis = E\ntarget = current\nstart = -0.3\nstop = 0.3\nstep = 0.05\n");
  std::ostringstream serial, parallel;
  write_csv(serial, run(cfg, 1));
  write_csv(parallel, run(cfg, 4));
  EXPECT_EQ(serial.str(), parallel.str());
  std::ostringstream again;
  write_csv(again, run(cfg, 3));
  EXPECT_EQ(again.str(), serial.str());
}

TEST(Run, SweepSurfacesPointErrors) {
  // the dimer with v = 0 is degenerate, so every point fails
  auto cfg = parse_config(
      "command = sweep\n[potential]\nkind = periodic\nperiods = 2\nvalues = 0 0\n[bloch]\nk_grid = 16\n"
      "[thermo]\nbeta = inf\nmu = 0.5\n[sweep]\naxis = lambda\ntarget = bloch-conductivity\nvalues = 0.1 0.2\n");
  EXPECT_THROW(run(cfg, 2), AssumptionViolated);
}

TEST(Run, DrudeRow) {
  auto cfg = parse_config("command = drude\n[thermo]\nbeta = inf\nmu = 1\nlambda = 0.5\nfield = 0.01\n");
  const auto row = run(cfg).front();
  EXPECT_NEAR(row.number("current"), 0.01 * 2 * std::sqrt(2.0), 1e-12);
}

TEST(Run, InsulatorSweepDecreasesWithDamping) {
  auto cfg = parse_config(
      "command = sweep\n[potential]\nkind = periodic\nperiods = 2\nvalues = 1 -1\n[bloch]\nk_grid = 256\n"
      "[thermo]\nbeta = inf\nmu = 0\n[sweep]\naxis = lambda\ntarget = bloch-conductivity\nvalues = 0.4 0.2 0.1\n");
  const auto table = run(cfg, 2);
  ASSERT_EQ(table.size(), 3u);
  for (std::size_t i = 1; i < 3; ++i) {
    const double ratio = table[i].number("sigma_exact") / table[i - 1].number("sigma_exact");
    EXPECT_GT(ratio, 0.4);
    EXPECT_LT(ratio, 0.6);
  }
  EXPECT_EQ(std::get<std::string>(table[0]["phase"]), "insulator");
}

TEST(Output, CsvIsDeterministicWithFullPrecision) {
  Table t;
  Row r;
  r.add("x", 0.1).add("n", 3LL).add("label", std::string("a,b")).add("inf", kInfinity);
  t.push_back(r);
  std::ostringstream os;
  write_csv(os, t);
  EXPECT_EQ(os.str(), "x,n,label,inf\n0.10000000000000001,3,\"a,b\",inf\n");
}

TEST(Output, JsonKeepsOrderAndNonFinite) {
  Table t;
  Row r;
  r.add("b", 2.5).add("a", kInfinity);
  t.push_back(r);
  std::ostringstream os;
  write_json(os, t);
  const auto j = nlohmann::ordered_json::parse(os.str());
  EXPECT_EQ(j[0].begin().key(), "b");
  EXPECT_EQ(j[0]["a"], "inf");
}
