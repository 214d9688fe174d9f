#include <chrono>
#include <ctime>
#include <fstream>

#include <nlohmann/json.hpp>
#include <torch/version.h>

#include "cli.hpp"
#include "utad/error.hpp"
#include "utad/model/checkpoint.hpp"

namespace utad::cli {

namespace fs = std::filesystem;

std::string kebab(const std::string& key) {
    std::string s = key;
    for (char& c : s) {
        if (c == '_') c = '-';
    }
    return s;
}

fs::path fresh_run_dir(const fs::path& requested) {
    auto usable = [](const fs::path& p) { return !fs::exists(p) || (fs::is_directory(p) && fs::is_empty(p)); };
    if (usable(requested)) return requested;
    for (int i = 1;; ++i) {
        fs::path p = requested;
        p += "-" + std::to_string(i);
        if (usable(p)) return p;
    }
}

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void RunManifest::set_config(const core::ExperimentConfig& cfg) {
    config = cfg.serialize();
    config_hash = cfg.hash();
}

void RunManifest::write(const fs::path& dir) const {
    nlohmann::json j;
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config;
    j["config_hash"] = config_hash.empty() ? "none" : config_hash;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["started"] = started;
    j["finished"] = finished;
    j["status"] = status;
    j["versions"] = {{"utad", "0.1.0"},
                     {"torch", TORCH_VERSION},
                     {"checkpoint_format", model::kCheckpointVersion}};
    const fs::path tmp = dir / "run.json.partial";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << j.dump(2) << '\n';
    }
    fs::rename(tmp, dir / "run.json");
}

RunManifest RunManifest::read(const fs::path& dir) {
    std::ifstream in(dir / "run.json");
    if (!in) throw Error((dir / "run.json").string() + ": no run manifest");
    const auto j = nlohmann::json::parse(in);
    RunManifest m;
    m.command = j.at("command");
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = j.at("config");
    m.config_hash = j.at("config_hash");
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.started = j.at("started");
    m.finished = j.at("finished");
    m.status = j.at("status");
    return m;
}

}  // namespace utad::cli
