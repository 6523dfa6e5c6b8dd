#include "dragg/io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dragg;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("dragg_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name, const std::string& body = {}) const {
    const auto p = (path_ / name).string();
    if (!body.empty()) std::ofstream(p) << body;
    return p;
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string lmp_rows(const std::string& date, double mwh, int skip = 0, int dup = 0) {
  std::string s;
  for (int h = 1; h <= 24; ++h) {
    if (h == skip) continue;
    s += date + "," + std::to_string(h) + "," + std::to_string(mwh) + "\n";
    if (h == dup) s += date + "," + std::to_string(h) + "," + std::to_string(mwh) + "\n";
  }
  return s;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.what();
  }
  return "no error";
}

DayResult golden_day() {
  const Dataset d = io::synth_generate(7, 4, 6);
  const std::string date = d.dates().front();
  GameConfig g;
  g.day = MarketDay::make(date, d.lmp.at(date));
  g.prosumers = build_prosumers(d.schedules(date), g.day.lambda, {}, 7);
  g.sample_budget = 20;
  g.rng_seed = 7;
  RunOptions o;
  o.restarts = 4;
  o.pi0_scale = 1e6;
  o.bounds = false;
  return run_day(g, FeatureBasis::affine(6, g.day.p_max), StopRule::fixed(20), o);
}

}  // namespace

TEST(Lmp, ConvertsMegawattHours) {
  TempDir t;
  const auto days = io::load_lmp(t.file("lmp.csv", "date,hour,price_mwh\n" + lmp_rows("2022-05-01", 50.0)));
  ASSERT_EQ(days.size(), 1u);
  EXPECT_EQ(days.at("2022-05-01").values(), Vector::Constant(24, 0.05));
}

TEST(Lmp, ReportsMissingAndDuplicateHours) {
  TempDir t;
  const auto miss = t.file("miss.csv", "date,hour,price_mwh\n" + lmp_rows("2022-05-01", 50.0, 13));
  EXPECT_NE(error_of([&] { io::load_lmp(miss); }).find("date 2022-05-01 missing hour 13"), std::string::npos);
  const auto dup = t.file("dup.csv", "date,hour,price_mwh\n" + lmp_rows("2022-05-01", 50.0, 0, 5));
  EXPECT_NE(error_of([&] { io::load_lmp(dup); }).find("duplicate record for date 2022-05-01 hour 5"),
            std::string::npos);
}

TEST(Lmp, RejectsMalformedRows) {
  TempDir t;
  EXPECT_NE(error_of([&] { io::load_lmp(t.file("a.csv", "date,hour,price_mwh\n2022-05-01,1,abc\n")); })
                .find("row 2: malformed number 'abc'"),
            std::string::npos);
  EXPECT_NE(error_of([&] { io::load_lmp(t.file("b.csv", "date,hour,price_mwh\n2022-05-01,25,1\n")); }).find("hour"),
            std::string::npos);
  EXPECT_NE(error_of([&] { io::load_lmp(t.file("c.csv", "date,hour,price_mwh\n2022-02-30,1,1\n")); }).find("bad date"),
            std::string::npos);
  EXPECT_NE(error_of([&] { io::load_lmp(t.file("d.csv", "date,hour,price_mwh\n2022-05-01,1,-3\n")); })
                .find("non-positive price"),
            std::string::npos);
  EXPECT_NE(error_of([&] { io::load_lmp(t.file("e.csv", "date,hour\n2022-05-01,1\n")); }).find("missing column"),
            std::string::npos);
  EXPECT_NE(error_of([&] { io::load_lmp(t.path().string() + "/nope.csv"); }).find("cannot open"), std::string::npos);
}

TEST(Lmp, CaisoExportMapsOntoPlainFormat) {
  TempDir t;
  std::string s = "INTERVALSTARTTIME_GMT,OPR_DT,OPR_HR,NODE,LMP_TYPE,MW\n";
  for (int h = 1; h <= 24; ++h) {
    const std::string hr = std::to_string(h);
    s += "x,2022-05-01," + hr + ",NODE_A,LMP," + std::to_string(40 + h) + "\n";
    s += "x,2022-05-01," + hr + ",NODE_A,MCC,1\n";
    s += "x,2022-05-01," + hr + ",NODE_B,LMP,999\n";
  }
  const auto days = io::load_lmp_caiso(t.file("oasis.csv", s), "NODE_A");
  ASSERT_EQ(days.size(), 1u);
  EXPECT_NEAR(days.at("2022-05-01")[0], 0.041, 1e-15);
  EXPECT_NEAR(days.at("2022-05-01")[23], 0.064, 1e-15);
  // Without a node filter the two nodes collide.
  EXPECT_NE(error_of([&] { io::load_lmp_caiso(t.file("oasis.csv")); }).find("duplicate"), std::string::npos);
}

TEST(Demand, LoadsBuildingsAndDropsEmptyDays) {
  TempDir t;
  std::string s = "building_id,date,hour,kwh\n";
  for (int h = 1; h <= 24; ++h) {
    s += "A,2022-05-01," + std::to_string(h) + ",1.5\n";
    s += "B,2022-05-01," + std::to_string(h) + ",0\n";
    s += "B,2022-05-02," + std::to_string(h) + ",2\n";
    s += "C,2022-05-01," + std::to_string(h) + ",0\n";
  }
  const auto dl = io::load_demand(t.file("demand.csv", s));
  EXPECT_EQ(dl.data.size(), 2u);
  EXPECT_EQ(dl.data.at("A").at("2022-05-01").values(), Vector::Constant(24, 1.5));
  EXPECT_EQ(dl.data.at("B").count("2022-05-01"), 0u);
  EXPECT_EQ(dl.data.count("C"), 0u);
  ASSERT_EQ(dl.warnings.size(), 2u);
  EXPECT_EQ(dl.warnings[0], "building B dropped on 2022-05-01: all-zero schedule");
}

TEST(Demand, NegativeEnergyIsAnError) {
  TempDir t;
  const auto p = t.file("neg.csv", "building_id,date,hour,kwh\nA,2022-05-01,1,-0.1\n");
  EXPECT_NE(error_of([&] { io::load_demand(p); }).find("negative kwh"), std::string::npos);
}

TEST(Files, SaveLoadRoundTrip) {
  TempDir t;
  const Dataset d = io::synth_generate(3, 5, 24, 2);
  io::save_lmp(t.file("lmp.csv"), d.lmp);
  io::save_demand(t.file("demand.csv"), d.demand);
  const Dataset back = io::load_dataset(t.file("lmp.csv"), t.file("demand.csv"), 24);
  EXPECT_EQ(back.lmp, d.lmp);
  EXPECT_EQ(back.demand, d.demand);
  // And the files themselves are a fixed point.
  io::save_lmp(t.file("lmp2.csv"), back.lmp);
  io::save_demand(t.file("demand2.csv"), back.demand);
  EXPECT_EQ(slurp(t.file("lmp.csv")), slurp(t.file("lmp2.csv")));
  EXPECT_EQ(slurp(t.file("demand.csv")), slurp(t.file("demand2.csv")));
}

TEST(Files, HandWrittenPricesSurviveRoundTrip) {
  TempDir t;
  std::string s = "date,hour,price_mwh\n";
  for (int h = 1; h <= 24; ++h) s += "2022-05-01," + std::to_string(h) + "," + std::to_string(17.3 + 0.37 * h) + "\n";
  const auto a = io::load_lmp(t.file("a.csv", s));
  io::save_lmp(t.file("b.csv"), a);
  EXPECT_EQ(io::load_lmp(t.file("b.csv")), a);
}

TEST(Synth, DeterministicShape) {
  const Dataset a = io::synth_generate(11, 71, 24), b = io::synth_generate(11, 71, 24);
  EXPECT_EQ(a.lmp, b.lmp);
  EXPECT_EQ(a.demand, b.demand);
  EXPECT_EQ(a.demand.size(), 71u);
  EXPECT_NE(io::synth_generate(12, 71, 24).lmp, a.lmp);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Dataset d = io::synth_generate(seed, 1, 24, 3);
    for (const auto& [date, lam] : d.lmp) {
      Eigen::Index peak = 0;
      lam.values().maxCoeff(&peak);
      EXPECT_GE(peak + 1, 17) << date;
      EXPECT_LE(peak + 1, 20) << date;
    }
  }
}

TEST(Config, TomlRoundTrip) {
  io::RunConfig c;
  c.lmp_path = "data/lmp.csv";
  c.demand_path = "data/demand \"x\".csv";
  c.node = "N1";
  c.horizon = 12;
  c.a = 1.5;
  c.q_rule = "uniform:0.1";
  c.u_scale = 1.0 / 6.0;
  c.u = 0.3;
  c.p_max = 0.012;
  c.samples = 250;
  c.forgetting = 0.97;
  c.pi0_scale = 1e6;
  c.change_tol = 1e-4;
  c.pe_window = 30;
  c.basis = "random-fourier:20";
  c.restarts = 9;
  c.seed = 4503599627370497ULL;
  c.jobs = 3;
  c.date = "2022-05-03";
  c.sweep_a = {1.0, 2.0};
  c.sweep_q_rule = {"fraction:0.01", "zero"};
  c.sweep_samples = {20, 500};
  c.sweep_buildings = {1, 71};
  c.sweep_seeds = {1, 2, 3};
  c.sweep_dates = {"2022-05-01"};
  const auto back = io::run_config_from_toml(io::parse_toml(io::to_toml(c)));
  EXPECT_TRUE(back == c) << io::to_toml(back);
  EXPECT_TRUE(io::run_config_from_toml(io::parse_toml(io::to_toml(io::RunConfig{}))) == io::RunConfig{});
}

TEST(Config, RejectsUnknownKeysAndBadTypes) {
  EXPECT_NE(error_of([] { io::run_config_from_toml(io::parse_toml("[learner]\nsampels = 3\n", "r.toml"), "r.toml"); })
                .find("r.toml: unknown key [learner] sampels"),
            std::string::npos);
  EXPECT_NE(error_of([] { io::run_config_from_toml(io::parse_toml("[game]\na = \"two\"\n")); }).find("must be a number"),
            std::string::npos);
  EXPECT_NE(error_of([] { io::run_config_from_toml(io::parse_toml("[learner]\nsamples = 2.5\n")); })
                .find("non-negative integer"),
            std::string::npos);
  EXPECT_NE(error_of([] { io::parse_toml("[game\n", "r.toml"); }).find("r.toml:1:"), std::string::npos);
  EXPECT_THROW(io::run_config_from_toml(io::parse_toml("[game]\nq_rule = \"half\"\n")), DataError);
}

TEST(Config, RelativePathsFollowTheConfigFile) {
  TempDir t;
  const auto p = t.file("run.toml", "# comment\n[data]\nlmp = \"lmp.csv\"  # trailing\ndemand = \"/abs/demand.csv\"\n");
  const auto c = io::load_run_config(p);
  EXPECT_EQ(c.lmp_path, (t.path() / "lmp.csv").string());
  EXPECT_EQ(c.demand_path, "/abs/demand.csv");
}

TEST(Json, InfiniteBoundsAreNull) {
  BoundInputs in;
  in.T = 1;
  in.delta = 1e-12;
  in.eps_m_max = 0.1;
  in.theta_r_max = 0.1;
  in.beta0 = 1.0;
  in.beta1 = 1.0;
  in.m = 0.9;
  in.lambda_max_pi0_inv = 0.1;
  in.L_pi = {1.0};
  in.L_i_hat = {1.0};
  const auto r = compute_bound_report(in, 2.0, {1.0});
  const auto j = io::to_json(r);
  EXPECT_TRUE(j["eps_a"].is_null());
  EXPECT_TRUE(j["g_a_interval"][1].is_null());
  EXPECT_EQ(j["inputs"]["delta"]["provenance"], "certified");
  const auto back = io::bound_inputs_from_json(io::Json::parse(j["inputs"].dump()));
  EXPECT_EQ(back.delta, in.delta);
  EXPECT_EQ(back.L_pi, in.L_pi);
}

TEST(Json, DayBoundReportIsReproducible) {
  const Dataset d = io::synth_generate(5, 3, 4);
  const std::string date = d.dates().front();
  GameConfig g;
  g.day = MarketDay::make(date, d.lmp.at(date));
  g.prosumers = build_prosumers(d.schedules(date), g.day.lambda, {}, 5);
  g.sample_budget = 40;
  RunOptions o;
  o.pi0_scale = 1e6;
  o.lipschitz_pairs = 10;
  const auto r = run_day(g, FeatureBasis::affine(4, g.day.p_max), StopRule::fixed(40), o);
  const auto j = io::Json::parse(io::to_json(r).dump());
  EXPECT_EQ(io::to_json(io::bound_report_from_day_json(j)).dump(), io::to_json(*r.bound_report).dump());
  EXPECT_EQ(j["prosumers"].size(), 3u);
  EXPECT_EQ(j["bid"]["delta_d"].size(), 4u);
}

TEST(Charts, EmptyInputIsAnError) {
  TempDir t;
  EXPECT_THROW(io::emit_charts(std::vector<DayResult>{}, t.path().string()), DomainError);
  EXPECT_THROW(io::emit_charts(std::vector<SweepRow>{}, t.path().string()), DomainError);
}

TEST(Charts, OneDayGivesThreeNamedFiles) {
  TempDir t;
  const auto r = golden_day();
  const auto files = io::emit_charts({r}, (t.path() / "charts").string());
  ASSERT_EQ(files.size(), 3u);
  EXPECT_EQ(fs::path(files[0]).filename(), "prices_demand_" + r.date + ".svg");
  EXPECT_EQ(fs::path(files[1]).filename(), "convergence_" + r.date + ".svg");
  EXPECT_EQ(fs::path(files[2]).filename(), "utilities.svg");
  for (const auto& f : files) EXPECT_EQ(slurp(f).rfind("<svg ", 0), 0u);
}

// Golden files were recorded from this exact run; set DRAGG_UPDATE_GOLDEN=1
// to re-record after an intentional change.
TEST(Charts, GoldenBytes) {
  TempDir t;
  const auto files = io::emit_charts({golden_day()}, t.path().string());
  const fs::path golden = DRAGG_GOLDEN_DIR;
  const bool update = std::getenv("DRAGG_UPDATE_GOLDEN") != nullptr;
  for (const auto& f : files) {
    const auto g = golden / fs::path(f).filename();
    if (update) fs::copy_file(f, g, fs::copy_options::overwrite_existing);
    ASSERT_TRUE(fs::exists(g)) << g;
    EXPECT_EQ(slurp(f), slurp(g.string())) << g;
  }
}

TEST(Sweep, CsvHasOneLinePerRow) {
  std::vector<SweepRow> rows(2);
  rows[0].date = "2022-05-01";
  rows[1].date = "2022-05";
  rows[1].monthly_mean = true;
  rows[1].status = "error: \"quoted\"";
  std::ostringstream os;
  io::write_sweep_csv(os, rows);
  std::istringstream in(os.str());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0].substr(0, 24), "date,kind,days,a,q_rule,");
  EXPECT_EQ(lines[1].substr(0, 15), "2022-05-01,day,");
  EXPECT_NE(lines[2].find("month-mean"), std::string::npos);
  EXPECT_NE(lines[2].find("\"error: 'quoted'\""), std::string::npos);
}
