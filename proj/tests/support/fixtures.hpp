#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "utad/core/config.hpp"
#include "utad/data/manifest.hpp"
#include "utad/data/phantom.hpp"

namespace fixture {

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("utad_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

/// Small phantom with a saved manifest (relative paths resolved by the loader).
inline utad::data::DatasetManifest make_phantom(const std::filesystem::path& root, int subjects = 4, int depth = 8,
                                                int side = 32, std::uint64_t seed = 3, int val = 1, int test = 1) {
    utad::data::PhantomOptions o;
    o.seed = seed;
    o.subjects = subjects;
    o.depth = depth;
    o.height = side;
    o.width = side;
    utad::data::generate_phantom(o, root);
    auto m = utad::data::DatasetManifest::scan(root, {subjects - val - test, val, test}, seed);
    m.save(root / "manifest.txt");
    return utad::data::DatasetManifest::load(root / "manifest.txt");
}

/// Tiny, fast network/training settings.
inline utad::core::ExperimentConfig tiny_config() {
    utad::core::ExperimentConfig c;
    c.resolution = 16;
    c.depth = 2;
    c.base_channels = 4;
    c.critic_channels = 4;
    c.critic_layers = 2;
    c.batch_size = 4;
    c.epochs = 2;
    c.lr_constant_epochs = 1;
    c.checkpoint_every = 1;
    c.max_steps_per_epoch = 3;
    c.seed = 5;
    return c;
}

}  // namespace fixture
