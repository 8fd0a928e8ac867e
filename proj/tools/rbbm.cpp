// SPDX-License-Identifier: MIT
/**
 * rbbm command-line tool.
 *
 *   rbbm <command> [kind] [--config FILE] [--out-dir DIR] [--<key> VALUE ...]
 *
 * Every configuration key is also a flag; flags override the config file,
 * which overrides the defaults.  Exit status: 0 success, 2 validation
 * error, 3 runtime failure.
 */
#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "rbbm/cli_runner.hpp"

int main(int argc, char** argv) {
    using namespace rbbm::cli;
    CLI::App app{"Two-type reducible branching Brownian motion laboratory"};
    app.set_help_flag("--help", "print this help and exit");  // -h is the key h
    app.set_version_flag("--version", std::string(kVersion));

    std::string command, config_path, out_dir;
    std::vector<std::string> args;
    std::map<std::string, std::string> flags;

    std::string names;
    for (const auto& n : command_names()) names += (names.empty() ? "" : ", ") + n;
    app.add_option("command", command, "one of: " + names)->required();
    app.add_option("args", args, "command argument (oracle kind: speed, bridge, transform, L)");
    app.add_option("--config", config_path, "key = value configuration file");
    app.add_option("--out-dir", out_dir, "output directory (default $BBM_OUT_DIR or ./bbm_out)");
    for (const auto& k : key_registry())
        app.add_option("--" + k.name, flags[k.name], k.help + " [default " + k.def + "]");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kValidation;
    }

    Config cfg;
    try {
        if (!config_path.empty()) cfg = load_config(config_path);
        for (const auto& k : key_registry())
            if (app.count("--" + k.name) > 0) cfg.set(k.name, flags[k.name], "--" + k.name);
    } catch (const rbbm::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kValidation;
    }

    const auto dir = resolve_out_dir(out_dir);
    const RunResult r = run_command(command, args, cfg, dir);
    if (r.exit_code != kOk) {
        std::cerr << r.message << '\n';
        return r.exit_code;
    }
    if (!r.message.empty()) std::cout << r.message << '\n';
    for (const auto& f : r.files) std::cout << (dir / f.path).string() << "  sha256=" << f.sha256 << '\n';
    return kOk;
}
