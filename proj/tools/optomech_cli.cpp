// optomech_cli: command-line front end for the optomech library.
//
//   optomech_cli <command> [--params file] [--out file] [--format csv|json]
//                          [--t axis] [--N axis] [--h axis] [--seed u64] [--threads n]
//   axis = value | start:stop:count[:log|lin]

#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "optomech/cli.hpp"

namespace cli = optomech::cli;

int main(int argc, char** argv) {
    CLI::App app{"Dissipative cavity-oscillator interferometer: analytic observables, sensitivity bounds and oracles"};
    app.require_subcommand(1);
    app.set_help_flag("--help", "print help and exit"); // -h would collide with the strain axis --h

    cli::RunConfig cfg;
    std::string format = "csv";
    std::map<CLI::App*, cli::Command> commands;

    auto add = [&](const std::string& name, cli::Command c, const std::string& help) {
        auto* sub = app.add_subcommand(name, help);
        commands[sub] = c;
        sub->add_option("--out,-o", cfg.output_path, "output file (default: standard output)");
        sub->add_option("--format,-f", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--seed", cfg.seed, "random seed");
        sub->add_option("--threads", cfg.threads, "worker threads (0 = hardware concurrency)");
        sub->add_option("--t", cfg.t_axis, "time axis");
        if (c != cli::Command::validate) {
            sub->add_option("--params,-p", cfg.params_path, "JSON parameter file (default: LIGO-type parameters)");
            sub->add_option("--N", cfg.N_axis, "photon-number axis");
            sub->add_option("--h", cfg.h_axis, "strain axis");
        }
        return sub;
    };

    add("kernels", cli::Command::kernels, "force/cosine/sine kernels and energy coefficients")
        ->add_option("--method", cfg.method, "closed_form, quadrature or leading_order");
    add("energy", cli::Command::energy, "oscillator mean energy");
    add("signal", cli::Command::signal, "detector mean, variance and relative fluctuation")
        ->add_option("--method", cfg.method, "closed_form, approx or series");
    add("sensitivity", cli::Command::sensitivity, "noise terms and detectability on envelope kernels");
    add("bounds", cli::Command::bounds, "photon-number and power bounds, optimum and maximum duration");
    add("sweep", cli::Command::sweep, "dense (t, N, h) grid with minimal detectable strain");
    add("validate", cli::Command::validate, "oracle suite on the natural-units benchmark")
        ->add_option("--trajectories", cfg.trajectories, "stochastic ensemble size");
    auto* fig = add("fig", cli::Command::fig, "data behind figures 2-5");
    auto* fig_flag = fig->add_option("--fig", cfg.fig_id, "figure id (2, 3, 4 or 5)");
    fig->add_option("id", cfg.fig_id, "figure id (2, 3, 4 or 5)")->excludes(fig_flag);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << cli::error_json("invalid_input", e.what(), {{"argv", std::vector<std::string>(argv + 1, argv + argc)}})
                         .dump()
                  << '\n';
        return cli::kExitInvalidInput;
    }

    for (const auto& [sub, c] : commands)
        if (sub->parsed()) cfg.command = c;
    cfg.format = format == "json" ? cli::Format::json : cli::Format::csv;
    return cli::dispatch(cfg);
}
