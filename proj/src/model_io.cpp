#include "unite/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace unite {

namespace {

constexpr char kMagic[4] = {'U', 'D', 'M', 'E'};
constexpr std::uint32_t kVersion = 1;

class ChecksumWriter {
public:
    explicit ChecksumWriter(std::ostream& out) : out_(out) {}

    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= b[i];
            hash_ *= 0x100000001B3ull;
        }
        out_.write(static_cast<const char*>(p),
                   static_cast<std::streamsize>(n));
    }

    void u32(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xFF;
        bytes(b, 4);
    }

    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }

    void f64(double v) {
        const auto u = std::bit_cast<std::uint64_t>(v);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = (u >> (8 * i)) & 0xFF;
        bytes(b, 8);
    }

    std::uint64_t hash() const { return hash_; }

private:
    std::ostream& out_;
    std::uint64_t hash_ = 0xCBF29CE484222325ull;  // FNV-1a 64 offset basis
};

class ChecksumReader {
public:
    explicit ChecksumReader(std::istream& in) : in_(in) {}

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_) throw std::runtime_error("model file truncated");
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= b[i];
            hash_ *= 0x100000001B3ull;
        }
    }

    std::uint32_t u32() {
        unsigned char b[4];
        bytes(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }

    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }

    double f64() {
        unsigned char b[8];
        bytes(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return std::bit_cast<double>(v);
    }

    std::uint64_t hash() const { return hash_; }

private:
    std::istream& in_;
    std::uint64_t hash_ = 0xCBF29CE484222325ull;
};

std::uint64_t read_raw_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("model file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_model(const MlpExpert& expert, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");

    const MlpArch& arch = expert.arch();
    const auto& params = expert.params();
    ChecksumWriter w(out);
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(arch.state_dim));
    w.u32(static_cast<std::uint32_t>(arch.t_embed_dim));
    w.u32(static_cast<std::uint32_t>(arch.cond_embed_dim));
    const auto dims = arch.layer_dims();
    w.u32(static_cast<std::uint32_t>(dims.size()));
    for (int d : dims) w.u32(static_cast<std::uint32_t>(d));
    w.u32(static_cast<std::uint32_t>(arch.labels.size()));
    for (int label : arch.labels) {
        w.i32(label);
        const double* row = params.data() + mlp_label_row_offset(arch, label);
        for (int c = 0; c < arch.cond_embed_dim; ++c) w.f64(row[c]);
    }
    {
        const double* row = params.data() + mlp_null_row_offset(arch);
        for (int c = 0; c < arch.cond_embed_dim; ++c) w.f64(row[c]);
    }
    const int layers = static_cast<int>(dims.size()) - 1;
    for (int l = 0; l < layers; ++l) {
        const std::size_t n =
            static_cast<std::size_t>(dims[static_cast<std::size_t>(l) + 1]) *
                dims[static_cast<std::size_t>(l)] +
            static_cast<std::size_t>(dims[static_cast<std::size_t>(l) + 1]);
        const double* p = params.data() + mlp_weight_offset(arch, l);
        for (std::size_t k = 0; k < n; ++k) w.f64(p[k]);
    }

    const std::uint64_t h = w.hash();
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (h >> (8 * i)) & 0xFF;
    out.write(reinterpret_cast<const char*>(b), 8);
    if (!out) throw std::runtime_error("failed writing " + path);
}

MlpExpert load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file " + path);

    ChecksumReader r(in);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(path + ": not a model file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw std::runtime_error(path + ": unsupported model version " +
                                 std::to_string(version));

    MlpArch arch;
    arch.state_dim = static_cast<int>(r.u32());
    arch.t_embed_dim = static_cast<int>(r.u32());
    arch.cond_embed_dim = static_cast<int>(r.u32());
    const std::uint32_t n_dims = r.u32();
    if (n_dims < 2 || n_dims > 64)
        throw std::runtime_error(path + ": implausible layer count");
    std::vector<int> dims(n_dims);
    for (auto& d : dims) {
        d = static_cast<int>(r.u32());
        if (d < 1 || d > (1 << 20))
            throw std::runtime_error(path + ": implausible layer dimension");
    }
    arch.hidden_dims.assign(dims.begin() + 1, dims.end() - 1);

    const std::uint32_t n_labels = r.u32();
    if (n_labels > (1u << 20))
        throw std::runtime_error(path + ": implausible label count");
    std::vector<std::pair<int, std::vector<double>>> rows;
    rows.reserve(n_labels);
    for (std::uint32_t i = 0; i < n_labels; ++i) {
        const int label = r.i32();
        std::vector<double> row(static_cast<std::size_t>(arch.cond_embed_dim));
        for (auto& v : row) v = r.f64();
        rows.emplace_back(label, std::move(row));
        arch.labels.push_back(label);
    }
    std::vector<double> null_row(static_cast<std::size_t>(arch.cond_embed_dim));
    for (auto& v : null_row) v = r.f64();

    arch.validate();
    if (dims != arch.layer_dims())
        throw std::runtime_error(path + ": layer dims inconsistent with header");

    std::vector<double> params(arch.param_count(), 0.0);
    const int layers = static_cast<int>(dims.size()) - 1;
    for (int l = 0; l < layers; ++l) {
        const std::size_t n =
            static_cast<std::size_t>(dims[static_cast<std::size_t>(l) + 1]) *
                dims[static_cast<std::size_t>(l)] +
            static_cast<std::size_t>(dims[static_cast<std::size_t>(l) + 1]);
        double* p = params.data() + mlp_weight_offset(arch, l);
        for (std::size_t k = 0; k < n; ++k) p[k] = r.f64();
    }
    for (const auto& [label, row] : rows)
        std::copy(row.begin(), row.end(),
                  params.begin() +
                      static_cast<std::ptrdiff_t>(mlp_label_row_offset(arch, label)));
    std::copy(null_row.begin(), null_row.end(),
              params.begin() +
                  static_cast<std::ptrdiff_t>(mlp_null_row_offset(arch)));

    const std::uint64_t expected = r.hash();
    const std::uint64_t stored = read_raw_u64(in);
    if (expected != stored)
        throw std::runtime_error(
            path + ": checksum mismatch (file corrupt or tampered)");
    return MlpExpert(std::move(arch), std::move(params));
}

}  // namespace unite
