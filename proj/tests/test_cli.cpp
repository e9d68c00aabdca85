#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "optomech/cli.hpp"

using namespace optomech;
using namespace optomech::cli;

namespace {

const std::string kSamples = OPTOMECH_SAMPLES_DIR;

struct Run {
    int code;
    std::string out, err;
};

Run run(const RunConfig& cfg) {
    std::ostringstream out, err;
    const int code = dispatch(cfg, out, err);
    return {code, out.str(), err.str()};
}

RunConfig config(Command c, Format f = Format::csv) {
    RunConfig cfg;
    cfg.command = c;
    cfg.format = f;
    return cfg;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Runs the installed binary and returns its exit status; stdout goes to `out`.
int shell(const std::string& args, const std::filesystem::path& out) {
    const std::string cmd = std::string("\"") + OPTOMECH_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::filesystem::path scratch(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("optomech_test_cli_" + name);
}

} // namespace

TEST(ParseAxis, SingleValue) {
    const auto a = parse_axis("2.5", "t");
    EXPECT_EQ(a.count, 1u);
    EXPECT_EQ(a.at(0), 2.5);
}

TEST(ParseAxis, LinearAndLog) {
    const auto lin = parse_axis("0:10:11", "t");
    EXPECT_FALSE(lin.log);
    EXPECT_DOUBLE_EQ(lin.at(3), 3.0);
    const auto log = parse_axis("1e8:1e12:5:log", "N");
    EXPECT_TRUE(log.log);
    EXPECT_NEAR(log.at(2), 1e10, 1e-3);
    EXPECT_EQ(log.at(4), 1e12);
}

TEST(ParseAxis, RejectsMalformedSpecs) {
    for (const char* bad : {"", "1:2", "1:2:0", "1:2:x", "a", "1:2:3:cubic", "0:1:3:log", "1:1:3", "1:2:3:log:x"})
        EXPECT_THROW(parse_axis(bad, "t"), InvalidInput) << bad;
}

TEST(FormatNumber, RoundTripsAndSpellsNonFinite) {
    for (double x : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300}) EXPECT_EQ(std::stod(format_number(x)), x);
    EXPECT_EQ(format_number(1.0), "1");
    EXPECT_EQ(format_number(std::nan("")), "nan");
    EXPECT_EQ(format_number(-HUGE_VAL), "-inf");
}

TEST(ParseParams, StrainBecomesForce) {
    const auto js = ojson::parse(R"({"omega": 1.77e15, "Omega": 6.283185307179586, "lambda": 1e-5, "mass": 10,
        "length": 4000, "force": {"h": 1e-22, "omega_gr": 628.3185307179586}})");
    const auto p = parse_params(js);
    ASSERT_TRUE(p.h.has_value());
    const double expect = 1e-22 * 4000 * 10 * 628.3185307179586 * 628.3185307179586;
    EXPECT_NEAR(p.force.F_m / expect, 1.0, 1e-14);
    EXPECT_EQ(p.constants.units, UnitSystem::si);
}

TEST(ParseParams, SampleFilesLoad) {
    const auto bench = load_params(kSamples + "/params/natural_benchmark.json");
    const auto d = bench.dynamics();
    EXPECT_NEAR(d.g, 0.2, 1e-15);
    EXPECT_NEAR(d.force.amplitude, 0.1, 1e-15);
    const auto series = load_params(kSamples + "/params/series_check.json");
    EXPECT_NEAR(series.dynamics().g, 0.05, 1e-15);
    EXPECT_NO_THROW(load_params(kSamples + "/params/ligo.json"));
}

TEST(ParseParams, RejectsBadInput) {
    const std::string base = R"("omega": 1, "Omega": 1, "mass": 1, "length": 1)";
    auto parse = [&](const std::string& extra) { return parse_params(ojson::parse("{" + base + extra + "}")); };
    EXPECT_NO_THROW(parse(""));
    EXPECT_THROW(parse(R"(, "colour": 3)"), InvalidInput);
    EXPECT_THROW(parse(R"(, "units": "cgs")"), InvalidInput);
    EXPECT_THROW(parse(R"(, "force": {"F_m": 1, "h": 1, "omega_gr": 1})"), InvalidInput);
    EXPECT_THROW(parse(R"(, "force": {"omega_gr": 1})"), InvalidInput);
    EXPECT_THROW(parse(R"(, "force": {"kind": "zero", "F_m": 1})"), InvalidInput);
    EXPECT_THROW(parse(R"(, "interferometer": {"layout": "ring"})"), InvalidInput);
    EXPECT_THROW(parse_params(ojson::parse(R"({"omega": 1, "Omega": 1, "mass": 1})")), InvalidInput);
    EXPECT_THROW(parse_params(ojson::parse(R"({"omega": "1", "Omega": 1, "mass": 1, "length": 1})")), InvalidInput);
}

TEST(Dispatch, KernelsVanishAtTimeZero) {
    auto cfg = config(Command::kernels);
    cfg.t_axis = "0";
    const auto r = run(cfg);
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(r.out, "t,phi_t,c_t,s_t,c0,c1,c2\n0,0,0,0,0,0,0\n");
}

TEST(Dispatch, BoundsJsonAtHundredSeconds) {
    auto cfg = config(Command::bounds, Format::json);
    cfg.t_axis = "100";
    const auto r = run(cfg);
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto js = ojson::parse(r.out);
    EXPECT_EQ(js["command"], "bounds");
    EXPECT_EQ(js["units"]["time"], "s");
    ASSERT_EQ(js["rows"].size(), 1u);
    const auto& row = js["rows"][0];
    EXPECT_NEAR(row["N_min"].get<double>() / 2e9, 1.0, 0.05);
    EXPECT_NEAR(row["t_max"].get<double>() / 1200.0, 1.0, 0.05);
    EXPECT_TRUE(row["window_nonempty"].get<bool>());
    EXPECT_GT(js["params"]["derived"]["g"].get<double>(), 0.0);
}

TEST(Dispatch, ShortTimeBoundsAreARegimeError) {
    auto cfg = config(Command::bounds);
    cfg.t_axis = "0.1";
    const auto r = run(cfg);
    EXPECT_EQ(r.code, kExitInvalidInput);
    EXPECT_TRUE(r.out.empty());
    const auto js = ojson::parse(r.err);
    EXPECT_EQ(js["code"], "regime");
    EXPECT_EQ(js["context"]["command"], "bounds");
}

TEST(Dispatch, InputErrors) {
    auto fig = config(Command::fig);
    fig.fig_id = 7;
    EXPECT_EQ(run(fig).code, kExitInvalidInput);

    auto missing = config(Command::energy);
    missing.params_path = kSamples + "/params/does_not_exist.json";
    const auto r = run(missing);
    EXPECT_EQ(r.code, kExitInvalidInput);
    EXPECT_EQ(ojson::parse(r.err)["code"], "invalid_input");

    auto validate = config(Command::validate);
    validate.params_path = kSamples + "/params/ligo.json";
    EXPECT_EQ(run(validate).code, kExitInvalidInput);

    auto axis = config(Command::kernels);
    axis.t_axis = "0:1";
    EXPECT_EQ(run(axis).code, kExitInvalidInput);
}

TEST(Dispatch, AstronomicalSeriesIsANumericalFailure) {
    auto cfg = config(Command::signal);
    cfg.method = "series";
    cfg.t_axis = "1";
    const auto r = run(cfg);
    EXPECT_EQ(r.code, kExitNumericalFailure);
    EXPECT_EQ(ojson::parse(r.err)["code"], "numerical_failure");
}

TEST(Dispatch, SeriesMatchesClosedFormOnSmallSample) {
    auto cfg = config(Command::signal, Format::json);
    cfg.params_path = kSamples + "/params/series_check.json";
    cfg.t_axis = "0.5:3:6";
    cfg.method = "closed_form";
    const auto closed = ojson::parse(run(cfg).out);
    cfg.method = "series";
    const auto r = run(cfg);
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto series = ojson::parse(r.out);
    for (std::size_t i = 0; i < 6; ++i)
        for (const char* col : {"I", "D"})
            EXPECT_NEAR(series["rows"][i][col].get<double>(), closed["rows"][i][col].get<double>(),
                        1e-9 * (1.0 + std::abs(closed["rows"][i][col].get<double>())))
                << col << " row " << i;
}

TEST(Dispatch, UnderpoweredValidationExitsThreeWithReport) {
    auto cfg = config(Command::validate);
    cfg.t_axis = "0.5";
    cfg.trajectories = 1;
    const auto r = run(cfg);
    EXPECT_EQ(r.code, kExitValidationFailure);
    EXPECT_EQ(r.out.rfind("check,value,tolerance,pass\n", 0), 0u);
    EXPECT_NE(r.out.find("false"), std::string::npos);
    EXPECT_EQ(ojson::parse(r.err)["code"], "validation_failed");
}

TEST(Dispatch, EnergyDefaultsToCavityPhotonNumber) {
    auto cfg = config(Command::energy, Format::json);
    cfg.t_axis = "1";
    const auto twin = ojson::parse(run(cfg).out);
    EXPECT_NEAR(twin["rows"][0]["N"].get<double>(), 0.5e10, 1e-3); // twin cavity splits 50:50 whatever sigma_r says
    cfg.params_path = kSamples + "/params/series_check.json";
    const auto general = ojson::parse(run(cfg).out);
    EXPECT_NEAR(general["rows"][0]["N"].get<double>(), 4.0 * 0.36, 1e-12);
}

TEST(Dispatch, WritesToFile) {
    const auto path = scratch("energy.csv");
    auto cfg = config(Command::energy);
    cfg.t_axis = "1:2:3";
    cfg.output_path = path.string();
    const auto r = run(cfg);
    ASSERT_EQ(r.code, kExitOk);
    EXPECT_TRUE(r.out.empty());
    const auto text = slurp(path);
    EXPECT_EQ(text.rfind("t,N,energy,energy_limit\n", 0), 0u);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
    std::filesystem::remove(path);
}

TEST(Binary, RepeatedRunsAreByteIdentical) {
    const auto a = scratch("sweep_a.csv"), b = scratch("sweep_b.csv"), c = scratch("sweep_c.csv");
    const std::string args = "sweep --t 1:1000:12:log --N 1e8:1e17:12:log";
    ASSERT_EQ(shell(args + " --threads 1", a), 0);
    ASSERT_EQ(shell(args + " --threads 1", b), 0);
    ASSERT_EQ(shell(args + " --threads 4", c), 0);
    const auto ta = slurp(a);
    EXPECT_EQ(std::count(ta.begin(), ta.end(), '\n'), 1 + 144);
    EXPECT_EQ(ta, slurp(b));
    EXPECT_EQ(ta, slurp(c));
    for (const auto& p : {a, b, c}) std::filesystem::remove(p);
}

TEST(Binary, FigureOutputIsByteIdentical) {
    const auto a = scratch("fig_a.json"), b = scratch("fig_b.json");
    ASSERT_EQ(shell("fig 3 --format json", a), 0);
    ASSERT_EQ(shell("fig --fig 3 --format json --threads 2", b), 0);
    EXPECT_EQ(slurp(a), slurp(b));
    const auto js = ojson::parse(slurp(a));
    EXPECT_EQ(js["rows"].size(), 100u);
    for (const auto& p : {a, b}) std::filesystem::remove(p);
}

TEST(Binary, ParseErrorsAreReported) {
    const auto out = scratch("bad.txt");
    EXPECT_EQ(shell("kernels --format xml", out), kExitInvalidInput);
    EXPECT_EQ(shell("frobnicate", out), kExitInvalidInput);
    EXPECT_EQ(shell("", out), kExitInvalidInput);
    std::filesystem::remove(out);
}
