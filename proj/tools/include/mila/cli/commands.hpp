#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mila/cli/workspace.hpp"

namespace mila::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitEnvironment = 2;

struct Options {
    std::filesystem::path workspace = ".";
    std::optional<OutputFormat> format;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> k_min;
    std::optional<std::filesystem::path> out;
    bool synthetic = false;
    std::vector<std::filesystem::path> models;  // empty: every model in the workspace
};

/// What a command produced: an exit code plus the same report rendered for
/// humans and for machines.
struct Outcome {
    int code = kExitOk;
    nlohmann::json report;
    std::string text;
};

Outcome cmd_validate(const Options& opts);
Outcome cmd_plan(const Options& opts);
Outcome cmd_generate(const Options& opts);
Outcome cmd_simulate(const Options& opts);
Outcome cmd_audit(const Options& opts);
Outcome cmd_demo(const Options& opts);

/// Parses arguments, dispatches, prints the outcome and maps exceptions to
/// exit codes (environment problems exit 2).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mila::cli
