#include <CLI11.hpp>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>

#include "widelimit/config.hpp"
#include "widelimit/errors.hpp"
#include "widelimit/experiments.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Args {
    std::string config;
    std::string out = "out";
    int threads = 0;
    bool verbose = false;
};

void add_common(CLI::App* sub, Args& args) {
    sub->add_option("--config", args.config, "experiment config (JSON)")->required();
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--threads", args.threads, "worker threads, 0 picks the hardware count")
        ->check(CLI::NonNegativeNumber);
    sub->add_flag("--verbose", args.verbose, "progress on stderr");
}

int run(const std::string& subcommand, const Args& args) {
    using namespace widelimit;
    ExperimentConfig cfg = load_config(args.config);
    const ExperimentKind expected = parse_experiment_kind(subcommand);
    if (cfg.kind != expected)
        throw InvalidConfig(args.config + ": experiment is \"" + to_string(cfg.kind) + "\" but subcommand is " +
                            subcommand);
    RunOptions opts;
    opts.threads = args.threads;
    opts.log = args.verbose ? &std::cerr : nullptr;
    run_and_write(cfg, args.out, opts);
    if (args.verbose) std::cerr << "wrote " << args.out << "/result.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-width network versus Gaussian-process experiments"};
    app.require_subcommand(1);
    Args args;
    for (const char* name : {"kernel", "rates", "kernel-clt", "posterior", "bound"})
        add_common(app.add_subcommand(name, std::string("run the ") + name + " experiment"), args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        return run(sub, args);
    } catch (const widelimit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << args.config << ": " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
}
