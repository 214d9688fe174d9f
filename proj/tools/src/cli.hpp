#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "utad/core/config.hpp"

namespace utad::cli {

/// Bad or missing arguments detected after parsing; exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by the binary and the tests.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

/// `requested` if it does not exist or is an empty directory, else the first free
/// `requested-1`, `requested-2`, ... Never returns an existing non-empty directory.
std::filesystem::path fresh_run_dir(const std::filesystem::path& requested);

/// "lambda_gp" -> "lambda-gp"
std::string kebab(const std::string& key);

/// Provenance record written as run.json into every run directory.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::string config;       // serialized ExperimentConfig, empty when not applicable
    std::string config_hash;  // "none" when not applicable
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
    std::string started, finished;
    std::string status = "running";

    void set_config(const core::ExperimentConfig& cfg);
    void write(const std::filesystem::path& dir) const;
    static RunManifest read(const std::filesystem::path& dir);
};

/// UTC ISO-8601 timestamp.
std::string timestamp_now();

}  // namespace utad::cli
