#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gfad/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Device activity detection experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::size_t threads = 0;
    auto* run = app.add_subcommand("run", "Run an experiment or sweep described by a JSON config");
    run->add_option("config", config_path, "Config file")->required();
    run->add_option("--threads", threads, "Worker threads (0 uses all cores; GF_THREADS overrides)");

    std::string csv_path, x_column, svg_path;
    auto* plot = app.add_subcommand("plot", "Plot error rate from a results CSV");
    plot->add_option("csv", csv_path, "Results CSV")->required();
    plot->add_option("--x", x_column, "Column for the horizontal axis")->required();
    plot->add_option("--out", svg_path, "Output SVG")->required();

    std::string fault;
    auto* selftest = app.add_subcommand("selftest", "Run the fast invariant checks");
    selftest->add_option("--inject-fault", fault, "Force the named check to fail");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (*run) return gfad::cli::cmd_run(config_path, threads, std::cout, std::cerr);
    if (*plot) return gfad::cli::cmd_plot(csv_path, x_column, svg_path, std::cerr);
    std::optional<std::string> f;
    if (!fault.empty()) f = fault;
    return gfad::cli::cmd_selftest(f, std::cout, std::cerr);
}
