#include "nmtattack/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace nmtattack {

namespace {

constexpr std::uint32_t kMagic = 0x414b5054;  // "TPKA" little-endian on disk
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t get_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw FormatError("checkpoint truncated");
    return v;
}
std::uint64_t get_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw FormatError("checkpoint truncated");
    return v;
}
double get_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw FormatError("checkpoint truncated");
    return v;
}

void write_header(std::ostream& os, ModelKind kind, const ModelConfig& c) {
    put_u32(os, kMagic);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(kind));
    put_u32(os, static_cast<std::uint32_t>(c.vocab_size));
    put_u32(os, static_cast<std::uint32_t>(c.d_model));
    put_u32(os, static_cast<std::uint32_t>(c.n_heads));
    put_u32(os, static_cast<std::uint32_t>(c.n_layers));
    put_u32(os, static_cast<std::uint32_t>(c.ffn_width));
    put_u32(os, static_cast<std::uint32_t>(c.max_len));
    put_f64(os, c.dropout);
}

CheckpointInfo read_header(std::istream& is, const std::string& path) {
    if (get_u32(is) != kMagic) throw FormatError(path + " is not a checkpoint file");
    const std::uint32_t version = get_u32(is);
    if (version != kVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    CheckpointInfo info;
    const std::uint32_t kind = get_u32(is);
    if (kind != 1 && kind != 2)
        throw FormatError(path + ": unknown model kind " + std::to_string(kind));
    info.kind = static_cast<ModelKind>(kind);
    info.config.vocab_size = static_cast<int>(get_u32(is));
    info.config.d_model = static_cast<int>(get_u32(is));
    info.config.n_heads = static_cast<int>(get_u32(is));
    info.config.n_layers = static_cast<int>(get_u32(is));
    info.config.ffn_width = static_cast<int>(get_u32(is));
    info.config.max_len = static_cast<int>(get_u32(is));
    info.config.dropout = get_f64(is);
    return info;
}

void write_tensors(std::ostream& os, std::vector<NamedParam> params) {
    put_u32(os, static_cast<std::uint32_t>(params.size()));
    for (auto& [name, t] : params) {
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<std::uint32_t>(t->shape.size()));
        for (int d : t->shape) put_u64(os, static_cast<std::uint64_t>(d));
        os.write(reinterpret_cast<const char*>(t->data.data()),
                 static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    }
}

void read_tensors(std::istream& is, std::vector<NamedParam> params, const std::string& path) {
    std::map<std::string, Tensor*> expected;
    for (auto& [name, t] : params) expected[name] = t;
    const std::uint32_t count = get_u32(is);
    if (count != expected.size())
        throw FormatError(path + ": checkpoint has " + std::to_string(count) + " tensors, model needs " +
                          std::to_string(expected.size()));
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw FormatError(path + ": checkpoint truncated");
        auto it = expected.find(name);
        if (it == expected.end()) throw FormatError(path + ": unexpected tensor '" + name + "'");
        Tensor* t = it->second;
        const std::uint32_t rank = get_u32(is);
        Shape shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(get_u64(is));
        if (shape != t->shape)
            throw FormatError(path + ": tensor '" + name + "' has shape " + shape_str(shape) +
                              ", expected " + shape_str(t->shape));
        is.read(reinterpret_cast<char*>(t->data.data()),
                static_cast<std::streamsize>(t->data.size() * sizeof(double)));
        if (!is) throw FormatError(path + ": checkpoint truncated in tensor '" + name + "'");
        expected.erase(it);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const NmtModel& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint " + path);
    write_header(os, ModelKind::Nmt, model.config);
    write_tensors(os, const_cast<NmtModel&>(model).named_parameters());
    if (!os) throw IoError("failed while writing checkpoint " + path);
}

void save_checkpoint(const std::string& path, const CausalLm& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint " + path);
    write_header(os, ModelKind::Lm, model.config);
    write_tensors(os, const_cast<CausalLm&>(model).named_parameters());
    if (!os) throw IoError("failed while writing checkpoint " + path);
}

CheckpointInfo read_checkpoint_info(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read checkpoint " + path);
    return read_header(is, path);
}

NmtModel load_nmt_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read checkpoint " + path);
    const CheckpointInfo info = read_header(is, path);
    if (info.kind != ModelKind::Nmt)
        throw FormatError(path + " holds a language model, not a translation model");
    NmtModel model(info.config);
    read_tensors(is, model.named_parameters(), path);
    return model;
}

CausalLm load_lm_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read checkpoint " + path);
    const CheckpointInfo info = read_header(is, path);
    if (info.kind != ModelKind::Lm)
        throw FormatError(path + " holds a translation model, not a language model");
    CausalLm model(info.config);
    read_tensors(is, model.named_parameters(), path);
    return model;
}

}  // namespace nmtattack
