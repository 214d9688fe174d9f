#include "utad/core/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "utad/error.hpp"

namespace utad::core {

std::string_view to_string(MaskMode m) noexcept {
    switch (m) {
        case MaskMode::WT: return "wt";
        case MaskMode::TC: return "tc";
        case MaskMode::ET: return "et";
        case MaskMode::Zeros: return "zeros";
        case MaskMode::Random: return "random";
    }
    return "?";
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

double parse_double(std::string_view key, std::string_view text) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw InvalidInput("config: key '" + std::string(key) + "' expects a real, got '" + std::string(text) + "'");
    }
    return v;
}

template <class Int>
Int parse_int(std::string_view key, std::string_view text) {
    Int v{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw InvalidInput("config: key '" + std::string(key) + "' expects an integer, got '" + std::string(text) + "'");
    }
    return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
    const std::string t = lower(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw InvalidInput("config: key '" + std::string(key) + "' expects a boolean, got '" + std::string(text) + "'");
}

struct Field {
    std::string key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, std::string_view)> set;
};

#define UTAD_REAL(name)                                                                  \
    Field {                                                                              \
        #name, [](const ExperimentConfig& c) { return format_double(c.name); },          \
            [](ExperimentConfig& c, std::string_view v) { c.name = parse_double(#name, v); } \
    }
#define UTAD_INT(name, type)                                                                  \
    Field {                                                                                   \
        #name, [](const ExperimentConfig& c) { return std::to_string(c.name); },              \
            [](ExperimentConfig& c, std::string_view v) { c.name = parse_int<type>(#name, v); } \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        UTAD_REAL(lambda_gp),
        UTAD_REAL(lambda_1),
        UTAD_REAL(lambda_2),
        UTAD_INT(epochs, int),
        UTAD_REAL(lr_initial),
        UTAD_REAL(lr_final),
        UTAD_INT(lr_constant_epochs, int),
        UTAD_REAL(moment_1),
        UTAD_REAL(moment_2),
        UTAD_INT(batch_size, int),
        UTAD_INT(critic_steps_per_gen_step, int),
        UTAD_INT(max_steps_per_epoch, int),
        UTAD_INT(checkpoint_every, int),
        Field{"mask_mode", [](const ExperimentConfig& c) { return std::string(to_string(c.mask_mode)); },
              [](ExperimentConfig& c, std::string_view v) {
                  auto m = parse_mask_mode(v);
                  if (!m) throw InvalidInput("config: unknown mask_mode '" + std::string(v) + "'");
                  c.mask_mode = *m;
              }},
        UTAD_INT(seed, std::uint64_t),
        UTAD_INT(resolution, int),
        UTAD_REAL(slice_threshold),
        UTAD_REAL(clip_low_percentile),
        UTAD_REAL(clip_high_percentile),
        Field{"augment", [](const ExperimentConfig& c) { return std::string(c.augment ? "true" : "false"); },
              [](ExperimentConfig& c, std::string_view v) { c.augment = parse_bool("augment", v); }},
        UTAD_INT(workers, int),
        Field{"student_scheme", [](const ExperimentConfig& c) { return std::string(to_string(c.student_scheme)); },
              [](ExperimentConfig& c, std::string_view v) {
                  auto s = parse_scheme(v);
                  if (!s) throw InvalidInput("config: unknown student_scheme '" + std::string(v) + "'");
                  c.student_scheme = *s;
              }},
        UTAD_INT(depth, int),
        UTAD_INT(base_channels, int),
        UTAD_INT(critic_channels, int),
        UTAD_INT(critic_layers, int),
    };
    return table;
}

#undef UTAD_REAL
#undef UTAD_INT

const Field& find_field(std::string_view key) {
    for (const auto& f : fields()) {
        if (f.key == key) return f;
    }
    throw InvalidInput("config: unknown key '" + std::string(key) + "'");
}

}  // namespace

std::optional<MaskMode> parse_mask_mode(std::string_view s) {
    const std::string t = lower(s);
    if (t == "wt") return MaskMode::WT;
    if (t == "tc") return MaskMode::TC;
    if (t == "et") return MaskMode::ET;
    if (t == "zeros") return MaskMode::Zeros;
    if (t == "random") return MaskMode::Random;
    return std::nullopt;
}

std::string_view to_string(StudentScheme s) noexcept {
    switch (s) {
        case StudentScheme::A: return "a";
        case StudentScheme::B: return "b";
        case StudentScheme::C: return "c";
        case StudentScheme::D: return "d";
    }
    return "?";
}

std::optional<StudentScheme> parse_scheme(std::string_view s) {
    const std::string t = lower(s);
    if (t == "a") return StudentScheme::A;
    if (t == "b") return StudentScheme::B;
    if (t == "c") return StudentScheme::C;
    if (t == "d") return StudentScheme::D;
    return std::nullopt;
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& what) { throw InvalidInput("config: " + what); };
    if (lambda_gp < 0 || lambda_1 < 0 || lambda_2 < 0) fail("loss weights must be non-negative");
    if (epochs < 1) fail("epochs must be positive");
    if (!(lr_initial > 0) || !(lr_final > 0)) fail("learning rates must be positive");
    if (lr_final > lr_initial) fail("lr_final must not exceed lr_initial");
    if (lr_constant_epochs < 0 || lr_constant_epochs > epochs) fail("lr_constant_epochs must lie in [0, epochs]");
    if (!(moment_1 >= 0 && moment_1 < 1) || !(moment_2 >= 0 && moment_2 < 1)) fail("Adam moments must lie in [0, 1)");
    if (batch_size < 1) fail("batch_size must be positive");
    if (critic_steps_per_gen_step < 1) fail("critic_steps_per_gen_step must be positive");
    if (max_steps_per_epoch < 0) fail("max_steps_per_epoch must be non-negative");
    if (checkpoint_every < 1) fail("checkpoint_every must be positive");
    if (depth < 1) fail("depth must be positive");
    if (resolution < 1 || resolution % (1 << depth) != 0) fail("resolution must be a positive multiple of 2^depth");
    if (!(slice_threshold >= 0 && slice_threshold <= 1)) fail("slice_threshold must lie in [0, 1]");
    if (!(clip_low_percentile >= 0 && clip_low_percentile < clip_high_percentile && clip_high_percentile <= 100)) {
        fail("clip percentiles must satisfy 0 <= low < high <= 100");
    }
    if (workers < 1) fail("workers must be positive");
    if (base_channels < 1 || critic_channels < 1) fail("channel widths must be positive");
    if (critic_layers < 1 || critic_layers > 6) fail("critic_layers must lie in [1, 6]");
    if (resolution % (1 << critic_layers) != 0) fail("resolution must be a multiple of 2^critic_layers");
}

std::string ExperimentConfig::serialize() const {
    std::ostringstream os;
    for (const auto& f : fields()) os << f.key << " = " << f.get(*this) << '\n';
    return os.str();
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
    ExperimentConfig cfg;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidInput("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write config " + path.string());
    out << serialize();
}

void ExperimentConfig::set(std::string_view key, std::string_view value) { find_field(key).set(*this, value); }

std::string ExperimentConfig::get(std::string_view key) const { return find_field(key).get(*this); }

const std::vector<std::string>& ExperimentConfig::keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> out;
        for (const auto& f : fields()) out.push_back(f.key);
        return out;
    }();
    return k;
}

std::string ExperimentConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : serialize()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace utad::core
