#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fabfix/neural.hpp"

namespace fabfix {

static_assert(std::endian::native == std::endian::little,
              "weight files are little-endian; big-endian hosts are not supported");

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'F', 'A', 'B', 'F', 'I', 'X', 'W', '1'};

std::vector<std::pair<std::string, std::vector<int>>> block_shapes(const ArchSpec& arch) {
    std::vector<std::pair<std::string, std::vector<int>>> out;
    for (int l = 0; l < 4; ++l) {
        const std::string name = "conv" + std::to_string(l + 1);
        out.emplace_back(name + ".kernel",
                         std::vector<int>{3, 3, arch.conv_in_channels(l), arch.channels[static_cast<std::size_t>(l)]});
        out.emplace_back(name + ".bias", std::vector<int>{arch.channels[static_cast<std::size_t>(l)]});
    }
    out.emplace_back("dense.w", std::vector<int>{arch.flat_dim(), arch.out_dim()});
    out.emplace_back("dense.b", std::vector<int>{arch.out_dim()});
    return out;
}

std::size_t shape_count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

} // namespace

void save_weights(const ModelWeights& weights, const std::string& path, const std::string& meta_json) {
    json meta;
    try {
        meta = json::parse(meta_json);
    } catch (const json::exception& e) {
        throw FormatError("save_weights: metadata is not valid JSON: " + std::string(e.what()));
    }

    json manifest;
    manifest["format"] = 1;
    manifest["arch"] = {{"patch", weights.arch.patch},
                        {"channels", weights.arch.channels},
                        {"kernel", ArchSpec::kernel}};
    json blocks = json::array();
    for (const auto& [name, shape] : block_shapes(weights.arch)) {
        blocks.push_back({{"name", name}, {"shape", shape}, {"count", shape_count(shape)}});
    }
    manifest["blocks"] = blocks;
    manifest["seed"] = weights.init_seed;
    manifest["meta"] = meta;

    const std::string text = manifest.dump();
    if (text.size() > 0xffffffffULL) throw FormatError("save_weights: manifest too large");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t len = static_cast<std::uint32_t>(text.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for_each_block(weights, [&](const std::string&, const std::vector<float>& v) {
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    });
    if (!out) throw FormatError("short write to '" + path + "'");
}

LoadedWeights load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "' for reading");

    char magic[8] = {};
    in.read(magic, sizeof(magic));
    if (in.gcount() != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw FormatError(path + ": bad magic (not a weight file)");
    }
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (in.gcount() != sizeof(len)) throw FormatError(path + ": truncated manifest length");

    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (in.gcount() != static_cast<std::streamsize>(len)) throw FormatError(path + ": truncated manifest");

    json manifest;
    try {
        manifest = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(path + ": manifest is not valid JSON: " + std::string(e.what()));
    }
    if (manifest.value("format", 0) != 1) throw FormatError(path + ": unsupported weight file format");

    ArchSpec arch;
    try {
        const json& ja = manifest.at("arch");
        arch.patch = ja.at("patch").get<int>();
        auto ch = ja.at("channels").get<std::vector<int>>();
        if (ch.size() != 4) throw FormatError(path + ": arch must declare 4 channel sizes");
        std::copy(ch.begin(), ch.end(), arch.channels.begin());
        if (ja.at("kernel").get<int>() != ArchSpec::kernel) {
            throw ShapeError(path + ": kernel size differs from the fixed 3x3 architecture");
        }
    } catch (const json::exception& e) {
        throw FormatError(path + ": bad arch manifest: " + std::string(e.what()));
    }
    arch.validate();

    // Validate the declared block shapes before touching the payload.
    const auto expected = block_shapes(arch);
    const json& blocks = manifest.at("blocks");
    if (!blocks.is_array() || blocks.size() != expected.size()) {
        throw ShapeError(path + ": manifest must declare " + std::to_string(expected.size()) + " blocks");
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const json& b = blocks[i];
        if (b.value("name", "") != expected[i].first) {
            throw ShapeError(path + ": block " + std::to_string(i) + " is '" + b.value("name", "") +
                             "', expected '" + expected[i].first + "'");
        }
        std::vector<int> shape = b.value("shape", std::vector<int>{});
        if (shape != expected[i].second) {
            throw ShapeError(path + ": block '" + expected[i].first + "' declares a shape that does not match the architecture");
        }
        if (b.value("count", std::size_t{0}) != shape_count(shape)) {
            throw ShapeError(path + ": block '" + expected[i].first + "' count disagrees with its shape");
        }
    }

    LoadedWeights result;
    result.weights = make_weights<float>(arch);
    result.weights.init_seed = manifest.value("seed", std::uint64_t{0});
    result.meta_json = manifest.value("meta", json::object()).dump();

    for_each_block(result.weights, [&](const std::string& name, std::vector<float>& v) {
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(v.size() * sizeof(float))) {
            throw FormatError(path + ": truncated payload in block '" + name + "'");
        }
    });
    return result;
}

} // namespace fabfix
