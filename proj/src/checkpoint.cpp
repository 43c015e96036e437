#include "gvt/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

namespace gvt {

namespace {

using nlohmann::json;

void put_u32_le(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64_le(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

uint32_t get_u32_le(const std::string& s, size_t at) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(s[at + size_t(i)])) << (8 * i);
    return v;
}

uint64_t get_u64_le(const std::string& s, size_t at) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(s[at + size_t(i)])) << (8 * i);
    return v;
}

constexpr uint32_t kVersion = 1;
const char kMagic[4] = {'G', 'V', 'T', 'C'};

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    json manifest = json::array();
    uint64_t offset = 0;
    for (const auto& t : ck.tensors) {
        const uint64_t bytes = uint64_t(t.data.size()) * 4;
        manifest.push_back({{"name", t.name},
                            {"dtype", "f32"},
                            {"shape", t.shape},
                            {"offset", offset},
                            {"bytes", bytes}});
        offset += bytes;
    }
    json meta = {{"kind", ck.kind},
                 {"config", json::parse(ck.config_json)},
                 {"tensors", manifest}};
    const std::string meta_text = meta.dump();

    std::string blob;
    blob.reserve(16 + meta_text.size() + size_t(offset));
    blob.append(kMagic, 4);
    put_u32_le(blob, kVersion);
    put_u64_le(blob, uint64_t(meta_text.size()));
    blob += meta_text;
    for (const auto& t : ck.tensors)
        for (float f : t.data) put_u32_le(blob, std::bit_cast<uint32_t>(f));

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write checkpoint: " + path);
        out.write(blob.data(), std::streamsize(blob.size()));
        if (!out) throw DataError("short write for checkpoint: " + path);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot move checkpoint into place: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (blob.size() < 16 || blob.compare(0, 4, kMagic, 4) != 0)
        throw DataError("not a checkpoint file (bad magic): " + path);
    const uint32_t version = get_u32_le(blob, 4);
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    const uint64_t meta_len = get_u64_le(blob, 8);
    if (16 + meta_len > blob.size()) throw DataError("checkpoint metadata out of bounds");
    json meta;
    try {
        meta = json::parse(blob.substr(16, size_t(meta_len)));
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
    }

    const size_t payload_at = 16 + size_t(meta_len);
    const uint64_t payload_size = blob.size() - payload_at;
    Checkpoint ck;
    ck.kind = meta.at("kind").get<std::string>();
    ck.config_json = meta.at("config").dump();
    uint64_t expected_offset = 0;
    for (const auto& entry : meta.at("tensors")) {
        TensorBlob t;
        t.name = entry.at("name").get<std::string>();
        if (entry.at("dtype").get<std::string>() != "f32")
            throw DataError("checkpoint tensor " + t.name + " has unsupported dtype");
        t.shape = entry.at("shape").get<Shape>();
        const uint64_t offset = entry.at("offset").get<uint64_t>();
        const uint64_t bytes = entry.at("bytes").get<uint64_t>();
        if (offset != expected_offset)
            throw DataError("checkpoint manifest offsets overlap or leave gaps at " + t.name);
        if (offset + bytes > payload_size || bytes % 4 != 0)
            throw DataError("checkpoint tensor " + t.name + " out of payload bounds");
        if (int64_t(bytes / 4) != shape_numel(t.shape))
            throw DataError("checkpoint tensor " + t.name + " shape/size mismatch");
        t.data.resize(size_t(bytes / 4));
        for (size_t i = 0; i < t.data.size(); ++i)
            t.data[i] = std::bit_cast<float>(get_u32_le(blob, payload_at + size_t(offset) + i * 4));
        expected_offset = offset + bytes;
        ck.tensors.push_back(std::move(t));
    }
    return ck;
}

// ---------------------------------------------------------------------------
// config JSON

std::string vqvae_config_to_json(const VqVaeConfig& cfg) {
    json j = {{"l_enc", cfg.l_enc},
              {"l_dec", cfg.l_dec},
              {"d", cfg.d},
              {"heads", cfg.heads},
              {"k_c", cfg.k_c},
              {"d_c", cfg.d_c},
              {"lambda_node", cfg.lambda_node},
              {"lambda_edge", cfg.lambda_edge},
              {"beta", cfg.beta},
              {"k_pe", cfg.k_pe},
              {"ff_mult", cfg.ff_mult},
              {"use_rope", cfg.use_rope},
              {"rope_base", cfg.rope_base},
              {"ordering", scheme_name(cfg.ordering)},
              {"alphabet", cfg.alphabet.symbols}};
    return j.dump();
}

VqVaeConfig vqvae_config_from_json(const std::string& text) {
    const json j = json::parse(text);
    VqVaeConfig cfg;
    cfg.l_enc = j.at("l_enc").get<int>();
    cfg.l_dec = j.at("l_dec").get<int>();
    cfg.d = j.at("d").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.k_c = j.at("k_c").get<int>();
    cfg.d_c = j.at("d_c").get<int>();
    cfg.lambda_node = j.at("lambda_node").get<double>();
    cfg.lambda_edge = j.at("lambda_edge").get<double>();
    cfg.beta = j.at("beta").get<double>();
    cfg.k_pe = j.at("k_pe").get<int>();
    cfg.ff_mult = j.at("ff_mult").get<int>();
    cfg.use_rope = j.at("use_rope").get<bool>();
    cfg.rope_base = j.at("rope_base").get<double>();
    cfg.ordering = scheme_from_name(j.at("ordering").get<std::string>());
    cfg.alphabet = Alphabet::from_symbols(j.at("alphabet").get<std::vector<std::string>>());
    cfg.validate();
    return cfg;
}

std::string ar_config_to_json(const ArConfig& cfg) {
    json j = {{"layers", cfg.layers},   {"d", cfg.d},
              {"heads", cfg.heads},     {"max_len", cfg.max_len},
              {"vocab", cfg.vocab},     {"ff_mult", cfg.ff_mult},
              {"temperature", cfg.temperature}, {"top_k", cfg.top_k}};
    return j.dump();
}

ArConfig ar_config_from_json(const std::string& text) {
    const json j = json::parse(text);
    ArConfig cfg;
    cfg.layers = j.at("layers").get<int>();
    cfg.d = j.at("d").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.max_len = j.at("max_len").get<int>();
    cfg.vocab = j.at("vocab").get<int>();
    cfg.ff_mult = j.at("ff_mult").get<int>();
    cfg.temperature = j.at("temperature").get<double>();
    cfg.top_k = j.at("top_k").get<int>();
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// model bridges

namespace {

std::vector<TensorBlob> blobs_from_params(const ParamList<float>& params) {
    std::vector<TensorBlob> out;
    out.reserve(params.size());
    for (const auto& p : params)
        out.push_back({p.name, p.tensor.shape(), p.tensor.data()});
    return out;
}

void fill_params_from_blobs(const ParamList<float>& params, const std::vector<TensorBlob>& blobs,
                            const std::string& what) {
    std::map<std::string, const TensorBlob*> by_name;
    for (const auto& b : blobs) {
        if (!by_name.emplace(b.name, &b).second)
            throw DataError(what + ": duplicate tensor " + b.name);
    }
    if (by_name.size() != params.size())
        throw DataError(what + ": checkpoint has " + std::to_string(by_name.size()) +
                        " tensors, model expects " + std::to_string(params.size()));
    for (const auto& p : params) {
        auto it = by_name.find(p.name);
        if (it == by_name.end()) throw DataError(what + ": missing tensor " + p.name);
        const TensorBlob& b = *it->second;
        if (b.shape != p.tensor.shape())
            throw DataError(what + ": tensor " + p.name + " has shape " + shape_str(b.shape) +
                            ", expected " + shape_str(p.tensor.shape()));
        Tensor<float> alias = p.tensor; // shared-handle copy, same storage
        alias.mutable_data() = b.data;
    }
}

} // namespace

Checkpoint to_checkpoint(const VqVaeParams<float>& p) {
    Checkpoint ck;
    ck.kind = "vqvae";
    ck.config_json = vqvae_config_to_json(p.cfg);
    ck.tensors = blobs_from_params(p.collect());
    return ck;
}

Checkpoint to_checkpoint(const ArParams<float>& p) {
    Checkpoint ck;
    ck.kind = "ar";
    ck.config_json = ar_config_to_json(p.cfg);
    ck.tensors = blobs_from_params(p.collect());
    return ck;
}

VqVaeParams<float> vqvae_from_checkpoint(const Checkpoint& ck) {
    if (ck.kind != "vqvae") throw DataError("checkpoint kind is '" + ck.kind + "', need 'vqvae'");
    const VqVaeConfig cfg = vqvae_config_from_json(ck.config_json);
    Rng rng(0); // placeholder values, overwritten below
    VqVaeParams<float> p(cfg, rng);
    fill_params_from_blobs(p.collect(), ck.tensors, "vqvae checkpoint");
    return p;
}

ArParams<float> ar_from_checkpoint(const Checkpoint& ck) {
    if (ck.kind != "ar") throw DataError("checkpoint kind is '" + ck.kind + "', need 'ar'");
    const ArConfig cfg = ar_config_from_json(ck.config_json);
    Rng rng(0);
    ArParams<float> p(cfg, rng);
    fill_params_from_blobs(p.collect(), ck.tensors, "ar checkpoint");
    return p;
}

} // namespace gvt
