#pragma once

// On-disk formats:
//  - model blob: magic + JSON header (config, tensor table, payload CRC32)
//    followed by raw little-endian float32 tensor data.
//  - energy-map directory: header.json plus one flat .f32 grid per map,
//    row-major (v-major), used by the CLI `infer --maps` debug path.

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dsac/energy.hpp"
#include "dsac/predictor.hpp"

namespace dsac {

namespace detail {

inline void write_bytes(std::ofstream& f, const void* p, size_t n) {
    f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!f) throw std::runtime_error("write failed");
}

inline std::vector<char> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    f.seekg(0, std::ios::end);
    const std::streamoff n = f.tellg();
    f.seekg(0);
    std::vector<char> buf(static_cast<size_t>(n));
    f.read(buf.data(), n);
    if (!f) throw std::runtime_error("read failed: " + path);
    return buf;
}

inline uint32_t crc32_of(const void* p, size_t n) {
    return static_cast<uint32_t>(
        ::crc32(0L, static_cast<const Bytef*>(p), static_cast<uInt>(n)));
}

}  // namespace detail

inline constexpr char kModelMagic[8] = {'D', 'S', 'A', 'C', 'M', 'D', 'L', '1'};

inline void save_predictor(const Predictor& pred, const std::string& path,
                           const nlohmann::json& extra = nlohmann::json::object()) {
    const ParamSet& ps = pred.params();
    nlohmann::json header;
    header["format_version"] = 1;
    header["config"] = pred.config().to_json();
    char hash_buf[32];
    std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                  static_cast<unsigned long long>(pred.config().arch_hash()));
    header["arch_hash"] = std::string(hash_buf);
    header["extra"] = extra;

    std::vector<float> payload;
    payload.reserve(ps.total_count());
    nlohmann::json table = nlohmann::json::array();
    for (const auto& t : ps.tensors) {
        table.push_back({{"name", t.name}, {"shape", t.shape}, {"count", t.count()}});
        payload.insert(payload.end(), t.data.begin(), t.data.end());
    }
    header["tensors"] = table;
    header["payload_crc32"] =
        detail::crc32_of(payload.data(), payload.size() * sizeof(float));

    const std::string hs = header.dump();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    detail::write_bytes(f, kModelMagic, sizeof(kModelMagic));
    const uint64_t hlen = hs.size();
    detail::write_bytes(f, &hlen, sizeof(hlen));
    detail::write_bytes(f, hs.data(), hs.size());
    detail::write_bytes(f, payload.data(), payload.size() * sizeof(float));
}

struct LoadedModel {
    std::unique_ptr<Predictor> predictor;
    nlohmann::json extra;
};

inline LoadedModel load_predictor(const std::string& path) {
    const std::vector<char> buf = detail::read_file(path);
    if (buf.size() < sizeof(kModelMagic) + sizeof(uint64_t) ||
        std::memcmp(buf.data(), kModelMagic, sizeof(kModelMagic)) != 0)
        throw std::runtime_error("not a model file: " + path);
    uint64_t hlen = 0;
    std::memcpy(&hlen, buf.data() + sizeof(kModelMagic), sizeof(hlen));
    const size_t hoff = sizeof(kModelMagic) + sizeof(uint64_t);
    if (hoff + hlen > buf.size()) throw std::runtime_error("truncated model header: " + path);
    const nlohmann::json header = nlohmann::json::parse(buf.data() + hoff, buf.data() + hoff + hlen);
    if (header.at("format_version").get<int>() != 1)
        throw std::runtime_error("unsupported model format version in " + path);

    const PredictorConfig cfg = PredictorConfig::from_json(header.at("config"));
    char hash_buf[32];
    std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                  static_cast<unsigned long long>(cfg.arch_hash()));
    if (header.at("arch_hash").get<std::string>() != hash_buf)
        throw std::runtime_error("architecture hash mismatch in " + path);

    LoadedModel out;
    out.predictor = make_predictor(cfg);
    out.extra = header.value("extra", nlohmann::json::object());
    ParamSet& ps = out.predictor->params();

    const size_t poff = hoff + hlen;
    const size_t pbytes = buf.size() - poff;
    const uint32_t crc = detail::crc32_of(buf.data() + poff, pbytes);
    if (crc != header.at("payload_crc32").get<uint32_t>())
        throw std::runtime_error("payload checksum mismatch (corrupted file): " + path);

    const auto& table = header.at("tensors");
    if (table.size() != ps.tensors.size())
        throw std::runtime_error("tensor table does not match architecture: " + path);
    size_t off = poff;
    for (size_t i = 0; i < ps.tensors.size(); ++i) {
        auto& t = ps.tensors[i];
        const auto& e = table[i];
        if (e.at("name").get<std::string>() != t.name ||
            e.at("count").get<size_t>() != t.count())
            throw std::runtime_error("tensor '" + t.name + "' does not match architecture");
        if (off + t.count() * sizeof(float) > buf.size())
            throw std::runtime_error("truncated model payload: " + path);
        std::memcpy(t.data.data(), buf.data() + off, t.count() * sizeof(float));
        off += t.count() * sizeof(float);
    }
    if (off != buf.size()) throw std::runtime_error("trailing bytes in model file: " + path);
    return out;
}

// ---------------------------------------------------------------------------
// EnergyMaps directory

namespace detail {

inline void write_f32_grid(const std::string& path, const Grid& g) {
    std::vector<float> f(g.data.size());
    for (size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(g.data[i]);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    write_bytes(out, f.data(), f.size() * sizeof(float));
}

inline Grid read_f32_grid(const std::string& path, int U, int V) {
    const std::vector<char> buf = read_file(path);
    if (buf.size() != static_cast<size_t>(U) * V * sizeof(float))
        throw std::runtime_error("grid size mismatch: " + path);
    Grid g(U, V);
    const float* f = reinterpret_cast<const float*>(buf.data());
    for (size_t i = 0; i < g.data.size(); ++i) g.data[i] = static_cast<double>(f[i]);
    return g;
}

}  // namespace detail

inline void save_energy_maps(const EnergyMaps& m, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json header = {{"U", m.width()},
                             {"V", m.height()},
                             {"alpha_mode", m.alpha_local ? "grid" : "scalar"},
                             {"beta_local", m.beta_local},
                             {"kappa_local", m.kappa_local}};
    std::ofstream hf(dir + "/header.json");
    hf << header.dump(2) << "\n";
    detail::write_f32_grid(dir + "/D.f32", m.D);
    detail::write_f32_grid(dir + "/beta.f32", m.beta);
    detail::write_f32_grid(dir + "/kappa.f32", m.kappa);
    if (m.alpha_local) {
        detail::write_f32_grid(dir + "/alpha.f32", m.alpha_grid);
    } else {
        const float one = static_cast<float>(m.alpha_scalar);
        std::ofstream out(dir + "/alpha.f32", std::ios::binary | std::ios::trunc);
        detail::write_bytes(out, &one, sizeof(float));
    }
}

inline EnergyMaps load_energy_maps(const std::string& dir) {
    const std::vector<char> hb = detail::read_file(dir + "/header.json");
    const nlohmann::json header = nlohmann::json::parse(hb.begin(), hb.end());
    const int U = header.at("U").get<int>();
    const int V = header.at("V").get<int>();
    EnergyMaps m;
    m.D = detail::read_f32_grid(dir + "/D.f32", U, V);
    m.beta = detail::read_f32_grid(dir + "/beta.f32", U, V);
    m.kappa = detail::read_f32_grid(dir + "/kappa.f32", U, V);
    m.alpha_local = header.at("alpha_mode").get<std::string>() == "grid";
    m.beta_local = header.value("beta_local", true);
    m.kappa_local = header.value("kappa_local", true);
    if (m.alpha_local) {
        m.alpha_grid = detail::read_f32_grid(dir + "/alpha.f32", U, V);
    } else {
        const std::vector<char> buf = detail::read_file(dir + "/alpha.f32");
        if (buf.size() != sizeof(float)) throw std::runtime_error("bad scalar alpha file");
        float a;
        std::memcpy(&a, buf.data(), sizeof(float));
        m.alpha_scalar = static_cast<double>(a);
    }
    return m;
}

}  // namespace dsac
