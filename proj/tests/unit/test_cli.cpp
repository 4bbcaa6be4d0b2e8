#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "gfad/cli.hpp"
#include "gfad/error.hpp"

using namespace gfad;
using namespace gfad::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    const fs::path p = fs::temp_directory_path() / ("gfad_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
}

fs::path write_file(const std::string& name, const std::string& text) {
    const fs::path p = scratch_dir() / name;
    std::ofstream(p) << text;
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::size_t count_of(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
    return n;
}

const char* kMinimal = R"({
  "system": {"n_devices": 12, "n_subcarriers": 8, "n_antennas": 8, "n_taps": 2},
  "trials": 3,
  "seed": 4,
  "threshold": 0.5
})";

} // namespace

TEST_CASE("config defaults and fields") {
    const RunConfig rc = parse_run_config(kMinimal);
    CHECK(rc.spec.system.n_devices == 12);
    CHECK(rc.spec.system.noise_var == 0.1);
    CHECK(rc.spec.trials == 3);
    CHECK(rc.spec.seed == 4);
    REQUIRE(rc.spec.threshold.has_value());
    CHECK(*rc.spec.threshold == 0.5);
    CHECK(rc.spec.detector.kind == DetectorKind::MlAct);
    CHECK(rc.spec.detector.rho == 10.0);
    CHECK(rc.spec.prior.q() == 0.05);
    CHECK(!rc.sweep);
    CHECK(!rc.csv_path);

    const RunConfig all = parse_run_config(R"({
      "system": {"n_devices": 10, "n_subcarriers": 8, "n_antennas": 4, "n_taps": 3, "noise_var": 0.2,
                 "gains": [1, 1, 1, 1, 1, 2, 2, 2, 2, 2]},
      "prior": {"kind": "group", "q": 0.1, "group_size": 5},
      "detector": {"kind": "map-virt-pen", "rho": 0.5, "max_sweeps": 9, "tol": 1e-7, "rho_continuation": true,
                   "rho_max": 100, "refresh_interval": 20, "order": "random"},
      "trials": 2, "seed": 8, "threshold": "calibrate", "calibration_trials": 5, "shared_pilots": true,
      "threads": 2,
      "sweep": {"parameter": "M", "values": [4, 8], "detectors": ["ml-act", "map-act"]},
      "output": {"csv": "out.csv", "svg": "out.svg"}
    })");
    CHECK(all.spec.system.gains.size() == 10);
    CHECK(all.spec.detector.kind == DetectorKind::MapVirtPen);
    CHECK(all.spec.detector.order == CoordinateOrder::RandomPerSweep);
    CHECK(all.spec.detector.rho_continuation);
    CHECK(!all.spec.threshold);
    CHECK(all.spec.calibration_trials == 5);
    CHECK(all.spec.shared_pilots);
    CHECK(all.threads == 2);
    REQUIRE(all.sweep);
    CHECK(all.sweep->values.size() == 2);
    CHECK(all.sweep->detectors.size() == 2);
    CHECK(*all.csv_path == "out.csv");
    const auto* g = std::get_if<GroupPrior>(&all.spec.prior.variant());
    REQUIRE(g != nullptr);
    CHECK(g->groups.size() == 2);
}

TEST_CASE("config errors are line anchored") {
    auto message = [](const std::string& text) {
        try {
            parse_run_config(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    const std::string unknown = message("{\n  \"trials\": 2,\n  \"foo\": 1\n}");
    CHECK(unknown.rfind("line 3:", 0) == 0);
    CHECK(unknown.find("foo") != std::string::npos);

    const std::string nested = message("{\n \"system\": {\n   \"n_devices\": 4,\n   \"bar\": 2\n }\n}");
    CHECK(nested.rfind("line 4:", 0) == 0);
    CHECK(nested.find("bar") != std::string::npos);

    CHECK(message("{\"trials\": \"many\"}").rfind("line 1:", 0) == 0);
    CHECK(message("{\n\"threshold\": 2}").rfind("line 2:", 0) == 0);
    CHECK(message("{\"detector\": {\"kind\": \"amp\"}}").find("amp") != std::string::npos);
    CHECK(message("{\"trials\": 2,,}").rfind("line 1:", 0) == 0);
    CHECK(message("{\"system\": {\"n_taps\": 30}}").find("line") == 0);
    CHECK(message("{\"prior\": {\"kind\": \"mvb\", \"coeffs\": [{\"omega\": [0], \"c\": 1}]}}").find("line") == 0);
    CHECK(!message("{\"sweep\": {\"parameter\": \"L\", \"values\": [2]}}").empty());
    CHECK(!message("{\"output\": {\"svg\": \"x.svg\"}}").empty());
}

TEST_CASE("csv formatting") {
    CHECK(std::string(kCsvHeader) ==
          "detector,N,L,M,P,q,trials,seed,threshold,error_rate,miss_rate,false_alarm_rate,avg_sweeps,avg_runtime_ms");
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(0.0) == "0");
    MetricRow r;
    r.detector = "ml-act";
    r.n_devices = 100;
    r.q = 0.05;
    std::ostringstream os;
    write_csv(os, {r});
    std::istringstream in(os.str());
    const CsvTable t = read_csv(in);
    CHECK(t.header.size() == 14);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0][t.column("detector")] == "ml-act");
    CHECK(std::stod(t.rows[0][t.column("q")]) == 0.05);
    CHECK_THROWS_AS(t.column("nope"), ConfigError);

    std::istringstream ragged("a,b\n1\n");
    CHECK_THROWS_AS(read_csv(ragged), ConfigError);
    std::istringstream empty("");
    CHECK_THROWS_AS(read_csv(empty), ConfigError);
}

TEST_CASE("cmd_run writes a header and one row") {
    const auto cfg = write_file("minimal.json", kMinimal);
    std::ostringstream out, err;
    CHECK(cmd_run(cfg.string(), 1, out, err) == 0);
    const std::string csv = out.str();
    CHECK(csv.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
    CHECK(count_lines(csv) == 2);
    CHECK(err.str().find("ml-act") != std::string::npos);
}

TEST_CASE("cmd_run rejects unknown keys with exit 2") {
    const auto cfg = write_file("bad.json", "{\n  \"trials\": 1,\n  \"foo\": true\n}\n");
    std::ostringstream out, err;
    CHECK(cmd_run(cfg.string(), 1, out, err) == 2);
    CHECK(err.str().find("foo") != std::string::npos);
    CHECK(err.str().find("line 3") != std::string::npos);
    CHECK(out.str().empty());
    CHECK(cmd_run((scratch_dir() / "missing.json").string(), 1, out, err) == 2);
}

TEST_CASE("cmd_run sweep writes one row per value and an SVG") {
    const fs::path csv = scratch_dir() / "sweep.csv";
    const fs::path svg = scratch_dir() / "sweep.svg";
    const auto cfg = write_file("sweep.json", R"({
      "system": {"n_devices": 12, "n_subcarriers": 8, "n_antennas": 8, "n_taps": 2},
      "trials": 2, "seed": 4, "threshold": 0.5,
      "sweep": {"parameter": "L", "values": [6, 8, 10]},
      "output": {"csv": ")" + csv.string() + R"(", "svg": ")" + svg.string() + R"("}
    })");
    std::ostringstream out, err;
    CHECK(cmd_run(cfg.string(), 2, out, err) == 0);
    const std::string text = read_file(csv);
    CHECK(count_lines(text) == 4);
    const std::string s = read_file(svg);
    CHECK(count_of(s, "<polyline") == 1);

    const fs::path replot = scratch_dir() / "replot.svg";
    CHECK(cmd_plot(csv.string(), "L", replot.string(), err) == 0);
    CHECK(read_file(replot) == s);
}

TEST_CASE("group_size sweep plots against the configured sizes") {
    const fs::path svg = scratch_dir() / "group.svg";
    const auto cfg = write_file("group.json", R"({
      "system": {"n_devices": 12, "n_subcarriers": 8, "n_antennas": 8, "n_taps": 2},
      "prior": {"kind": "group", "q": 0.2, "k_groups": 3},
      "detector": {"kind": "map-act"},
      "trials": 2, "seed": 4, "threshold": 0.5,
      "sweep": {"parameter": "group_size", "values": [2, 4], "detectors": ["ml-act", "map-act"]},
      "output": {"svg": ")" + svg.string() + R"("}
    })");
    std::ostringstream out, err;
    CHECK(cmd_run(cfg.string(), 1, out, err) == 0);
    CHECK(count_lines(out.str()) == 5);
    CHECK(count_of(read_file(svg), "<polyline") == 2);
}

TEST_CASE("render_svg series, legend and floor") {
    std::istringstream in(std::string(kCsvHeader) + "\n"
                          "ml-act,100,16,32,2,0.05,200,1,0.5,0.01,0.01,0,3,1\n"
                          "ml-act,100,24,32,2,0.05,200,1,0.5,0.001,0.001,0,3,1\n"
                          "ml-act,100,32,32,2,0.05,200,1,0.5,0,0,0,3,1\n"
                          "map-act,100,16,32,2,0.05,200,1,0.5,0.005,0.005,0,3,1\n"
                          "map-act,100,24,32,2,0.05,200,1,0.5,0,0,0,3,1\n"
                          "map-act,100,32,32,2,0.05,200,1,0.5,0,0,0,3,1\n");
    const std::string svg = render_svg(read_csv(in), "L");
    CHECK(count_of(svg, "<polyline") == 2);
    CHECK(count_of(svg, "class=\"legend\"") == 2);
    CHECK(svg.find("<title>") != std::string::npos);
    CHECK(svg.find("2.5e-05") != std::string::npos);  // 1 / (2 * 100 * 200)

    const std::regex points("points=\"([^\"]*)\"");
    std::smatch m;
    REQUIRE(std::regex_search(svg, m, points));
    const std::string pts = m[1].str();
    CHECK(std::count(pts.begin(), pts.end(), ',') == 3);

    std::istringstream header_only(std::string(kCsvHeader) + "\n");
    CHECK_THROWS_AS(render_svg(read_csv(header_only), "L"), ConfigError);
}

TEST_CASE("cmd_plot exits 2 on malformed input") {
    std::ostringstream err;
    const auto empty = write_file("empty.csv", std::string(kCsvHeader) + "\n");
    CHECK(cmd_plot(empty.string(), "L", (scratch_dir() / "e.svg").string(), err) == 2);
    const auto ragged = write_file("ragged.csv", std::string(kCsvHeader) + "\nml-act,1\n");
    CHECK(cmd_plot(ragged.string(), "L", (scratch_dir() / "r.svg").string(), err) == 2);
    const auto good = write_file("good.csv", std::string(kCsvHeader) + "\nml-act,100,16,32,2,0.05,200,1,0.5,0.01,0.01,0,3,1\n");
    CHECK(cmd_plot(good.string(), "K", (scratch_dir() / "k.svg").string(), err) == 2);
    CHECK(cmd_plot(good.string(), "L", (scratch_dir() / "g.svg").string(), err) == 0);
}

TEST_CASE("selftest passes and reports injected faults") {
    std::ostringstream out, err;
    CHECK(cmd_selftest(std::nullopt, out, err) == 0);
    CHECK(count_lines(out.str()) == selftest_check_names().size());
    CHECK(out.str().find("FAIL") == std::string::npos);

    std::ostringstream out2;
    CHECK(cmd_selftest(std::string("woodbury-direct-inverse"), out2, err) == 1);
    CHECK(out2.str().find("FAIL woodbury-direct-inverse") != std::string::npos);

    std::ostringstream out3, err3;
    CHECK(cmd_selftest(std::string("no-such-check"), out3, err3) == 2);
}

TEST_CASE("same config gives the same rows") {
    const auto cfg = write_file("repeat.json", kMinimal);
    std::ostringstream a, b, err;
    CHECK(cmd_run(cfg.string(), 1, a, err) == 0);
    CHECK(cmd_run(cfg.string(), 4, b, err) == 0);
    auto strip_runtime = [](const std::string& csv) {
        std::string out;
        std::istringstream in(csv);
        for (std::string line; std::getline(in, line);) out += line.substr(0, line.rfind(',')) + "\n";
        return out;
    };
    CHECK(strip_runtime(a.str()) == strip_runtime(b.str()));
}
