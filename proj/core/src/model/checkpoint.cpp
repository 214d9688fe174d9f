#include "utad/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "utad/core/modality.hpp"
#include "utad/error.hpp"

namespace utad::model {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'U', 'T', 'A', 'D', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void put_le(std::ostream& out, T v) {
    unsigned char b[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
    unsigned char b[sizeof(T)];
    in.read(reinterpret_cast<char*>(b), sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return static_cast<T>(v);
}

void write_floats(std::ostream& out, const float* p, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(float)));
    } else {
        for (std::size_t i = 0; i < n; ++i) put_le(out, std::bit_cast<std::uint32_t>(p[i]));
    }
}

void read_floats(std::istream& in, float* p, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(float)));
    } else {
        for (std::size_t i = 0; i < n; ++i) p[i] = std::bit_cast<float>(get_le<std::uint32_t>(in));
    }
}

std::string shape_string(c10::IntArrayRef s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

}  // namespace

void write_checkpoint(const fs::path& path, const CheckpointContents& c) {
    json table = json::array();
    for (const auto& [name, t] : c.tensors) {
        if (t.scalar_type() != torch::kFloat32) throw CheckpointError("checkpoint: tensor '" + name + "' is not float32");
        table.push_back({{"name", name}, {"shape", t.sizes().vec()}});
    }
    const json manifest = {
        {"format", "utad-checkpoint"},
        {"modality_ordering", core::kModalityOrdering},
        {"role", to_string(c.role)},
        {"scheme", core::to_string(c.scheme)},
        {"epoch", c.epoch},
        {"fusion", c.fusion_kind},
        {"config", c.config.serialize()},
        {"config_hash", c.config.hash()},
        {"metadata", c.metadata},
        {"tensors", table},
    };
    const std::string text = manifest.dump(1);

    const fs::path tmp = path.string() + ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
        out.write(kMagic, sizeof kMagic);
        put_le<std::uint32_t>(out, kCheckpointVersion);
        put_le<std::uint64_t>(out, text.size());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& [name, t] : c.tensors) {
            const torch::Tensor flat = t.detach().contiguous();
            write_floats(out, flat.data_ptr<float>(), static_cast<std::size_t>(flat.numel()));
        }
        if (!out) throw CheckpointError("write failed for checkpoint " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw CheckpointError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

CheckpointContents read_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(path.string() + ": cannot open checkpoint");
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw CheckpointError(path.string() + ": not a utad checkpoint");
    const auto version = get_le<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw CheckpointError(path.string() + ": checkpoint format version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
    }
    const auto length = get_le<std::uint64_t>(in);
    if (!in || length > (std::uint64_t{1} << 32)) throw CheckpointError(path.string() + ": corrupt manifest length");
    std::string text(length, '\0');
    in.read(text.data(), static_cast<std::streamsize>(length));
    if (!in) throw CheckpointError(path.string() + ": truncated manifest");

    CheckpointContents c;
    try {
        const json m = json::parse(text);
        if (m.at("modality_ordering").get<std::string>() != core::kModalityOrdering) {
            throw CheckpointError(path.string() + ": checkpoint uses modality ordering '" +
                                  m.at("modality_ordering").get<std::string>() + "'");
        }
        const auto role = parse_role(m.at("role").get<std::string>());
        const auto scheme = core::parse_scheme(m.at("scheme").get<std::string>());
        if (!role || !scheme) throw CheckpointError(path.string() + ": bad role or scheme in manifest");
        c.role = *role;
        c.scheme = *scheme;
        c.epoch = m.at("epoch").get<int>();
        c.fusion_kind = m.at("fusion").get<std::string>();
        c.config = core::ExperimentConfig::parse(m.at("config").get<std::string>());
        c.metadata = m.at("metadata").get<std::map<std::string, std::string>>();
        for (const auto& entry : m.at("tensors")) {
            const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
            torch::Tensor t = torch::empty(shape, torch::kFloat32);
            read_floats(in, t.data_ptr<float>(), static_cast<std::size_t>(t.numel()));
            if (!in) throw CheckpointError(path.string() + ": truncated payload at '" + entry.at("name").get<std::string>() + "'");
            c.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
        }
    } catch (const json::exception& e) {
        throw CheckpointError(path.string() + ": malformed manifest: " + e.what());
    } catch (const InvalidInput& e) {
        throw CheckpointError(path.string() + ": " + e.what());
    }
    in.peek();
    if (!in.eof()) throw CheckpointError(path.string() + ": trailing bytes after payload");
    return c;
}

CheckpointContents snapshot(const NetworkSet& nets, const core::ExperimentConfig& cfg, int epoch) {
    CheckpointContents c;
    c.config = cfg;
    c.role = nets.role;
    c.scheme = nets.scheme;
    c.epoch = epoch;
    c.fusion_kind = nets.generator->fusion() ? nets.generator->fusion()->kind() : "none";
    for (const auto& [name, t] : nets.named_tensors()) c.tensors.emplace_back(name, t.detach().clone());
    return c;
}

torch::Tensor find_tensor(const CheckpointContents& c, const std::string& name) {
    for (const auto& [n, t] : c.tensors) {
        if (n == name) return t;
    }
    return {};
}

void restore_networks(NetworkSet& nets, const CheckpointContents& c) {
    std::map<std::string, const torch::Tensor*> index;
    for (const auto& [n, t] : c.tensors) index[n] = &t;
    torch::NoGradGuard no_grad;
    for (auto& [name, target] : nets.named_tensors()) {
        auto it = index.find(name);
        if (it == index.end()) throw CheckpointError("checkpoint has no parameter '" + name + "'");
        if (!it->second->sizes().equals(target.sizes())) {
            throw CheckpointError("parameter '" + name + "' has shape " + shape_string(it->second->sizes()) +
                                  " in the checkpoint but " + shape_string(target.sizes()) + " in the network");
        }
        target.copy_(*it->second);
    }
}

NetworkSet networks_from(const CheckpointContents& c) {
    core::ExperimentConfig cfg = c.config;
    cfg.student_scheme = c.scheme;
    NetworkSet nets = NetworkSet::create(cfg, c.role, cfg.seed);
    restore_networks(nets, c);
    return nets;
}

}  // namespace utad::model
