// rdflab: batch front-end for the flow laboratory.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rdflab/parallel.hpp"
#include "rdflab_cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"rdflab: Ricci-DeTurck flow experiments on uniform grids"};
    app.require_subcommand(1, 1);
    std::string config_path, out_dir = "out";
    int threads = -1;
    app.add_option("--config", config_path, "key = value config file")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads (0 = auto; RDFLAB_THREADS otherwise)");
    app.fallthrough();
    for (const auto& [name, fn] : rdflab::cli::commands()) app.add_subcommand(name);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : rdflab::cli::kExitError;
    }
    if (threads >= 0) rdflab::set_threads(threads);
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        const auto cfg = rdflab::io::Config::load(config_path);
        const int status = rdflab::cli::run(command, cfg, out_dir, std::cerr);
        std::cerr << command << (status == 0 ? ": pass" : ": check failed") << "\n";
        return status;
    } catch (const std::exception& e) {
        std::cerr << "rdflab " << command << ": error: " << e.what() << "\n";
        return rdflab::cli::kExitError;
    }
}
