#include "adaloc/model_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace adaloc {

namespace {

void append_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char(uint8_t(v >> (8 * i))));
}

uint32_t read_u32(const std::string& bytes, size_t offset) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(bytes[offset + size_t(i)])) << (8 * i);
    return v;
}

constexpr uint32_t kVersion = 1;

}  // namespace

void atomic_write_file(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out.write(contents.data(), std::streamsize(contents.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("rename failed for " + target.string() + ": " + ec.message());
}

void write_model(const std::string& path, const ParameterStore& store, const nlohmann::json& aux) {
    nlohmann::json header;
    header["spec"] = store.spec.to_json();
    header["tag"] = tag_name(store.tag);
    if (!aux.empty()) header["aux"] = aux;
    const std::string header_json = header.dump();

    std::string bytes;
    bytes.reserve(12 + header_json.size() + store.dim() * 8 + 32);
    bytes += "ADLM";
    append_u32(bytes, kVersion);
    append_u32(bytes, uint32_t(header_json.size()));
    bytes += header_json;
    for (double v : store.flatten()) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        for (int i = 0; i < 8; ++i) bytes.push_back(char(uint8_t(bits >> (8 * i))));
    }
    const Hash32 digest = sha256(bytes.data(), bytes.size());
    bytes.append(reinterpret_cast<const char*>(digest.data()), digest.size());
    atomic_write_file(path, bytes);
}

ModelFile read_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    auto truncated = [&](size_t needed) {
        throw ParseError("model file truncated: " + path + " (need " + std::to_string(needed) +
                         " bytes, have " + std::to_string(bytes.size()) + ")");
    };
    if (bytes.size() < 12) truncated(12);
    if (bytes.compare(0, 4, "ADLM") != 0) throw ParseError("bad magic in model file: " + path);
    const uint32_t version = read_u32(bytes, 4);
    if (version != kVersion) throw ParseError("unsupported model version " + std::to_string(version));
    const uint32_t header_len = read_u32(bytes, 8);
    if (bytes.size() < 12 + header_len) truncated(12 + header_len);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(12, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad model header JSON: ") + e.what());
    }
    const NetworkSpec spec = NetworkSpec::from_json(header.at("spec"));
    const size_t d = spec.param_count();
    const size_t values_offset = 12 + header_len;
    const size_t expected = values_offset + d * 8 + 32;
    if (bytes.size() < expected) truncated(expected);
    if (bytes.size() != expected) throw ParseError("model file has trailing bytes: " + path);

    const Hash32 recorded = [&] {
        Hash32 h;
        std::memcpy(h.data(), bytes.data() + long(expected - 32), 32);
        return h;
    }();
    const Hash32 actual = sha256(bytes.data(), expected - 32);
    if (recorded != actual) throw ParseError("model file hash mismatch: " + path);

    ModelFile mf;
    mf.store = init_network(spec, 0);
    mf.store.tag = tag_from_name(header.at("tag").get<std::string>());
    std::vector<double> flat(d);
    for (size_t i = 0; i < d; ++i) {
        uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= uint64_t(uint8_t(bytes[values_offset + i * 8 + size_t(b)])) << (8 * b);
        }
        std::memcpy(&flat[i], &bits, 8);
    }
    mf.store.unflatten(flat);
    mf.aux = header.value("aux", nlohmann::json::object());
    return mf;
}

}  // namespace adaloc
