#include "stylekit/checkpoint.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace stylekit {

namespace {

constexpr char kMagic[4] = {'S', 'K', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void sort_params(ParamList& params) {
    std::sort(params.begin(), params.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
}

void save_checkpoint(const std::string& path, const ParamList& params) {
    ParamList sorted = params;
    sort_params(sorted);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("checkpoint: cannot write " + tmp);
        os.write(kMagic, 4);
        write_pod(os, kVersion);
        write_pod(os, static_cast<std::uint64_t>(sorted.size()));
        for (const auto& [name, t] : sorted) {
            write_pod(os, static_cast<std::uint32_t>(name.size()));
            os.write(name.data(), static_cast<std::streamsize>(name.size()));
            write_pod(os, static_cast<std::uint32_t>(t->rank()));
            for (int i = 0; i < t->rank(); ++i)
                write_pod(os, static_cast<std::int64_t>(t->dim(i)));
            os.write(reinterpret_cast<const char*>(t->data()),
                     static_cast<std::streamsize>(t->size()) * sizeof(double));
        }
        if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("checkpoint: cannot move " + tmp + " to " + path);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " +
                                 std::to_string(version) + " in " + path);
    const auto count = read_pod<std::uint64_t>(is);
    std::map<std::string, Tensor> out;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const auto rank = read_pod<std::uint32_t>(is);
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<int>(read_pod<std::int64_t>(is));
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size()) * sizeof(double));
        if (!is) throw std::runtime_error("checkpoint: truncated tensor " + name);
        out.emplace(std::move(name), std::move(t));
    }
    return out;
}

void restore_params(const std::string& path, const ParamList& params) {
    auto archive = load_checkpoint(path);
    std::size_t used = 0;
    for (const auto& [name, t] : params) {
        auto it = archive.find(name);
        if (it == archive.end())
            throw std::runtime_error("checkpoint: " + path + " is missing tensor " + name);
        if (it->second.shape() != t->shape())
            throw std::runtime_error("checkpoint: shape mismatch for " + name + ": file " +
                                     shape_str(it->second.shape()) + " vs model " +
                                     shape_str(t->shape()));
        *t = it->second;
        ++used;
    }
    if (used != archive.size())
        throw std::runtime_error("checkpoint: " + path + " contains " +
                                 std::to_string(archive.size()) + " tensors but model expects " +
                                 std::to_string(used));
}

std::uint64_t params_hash(const ParamList& params) {
    ParamList sorted = params;
    sort_params(sorted);
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& [name, t] : sorted) {
        h = fnv1a64(name, h);
        h = tensor_hash(*t, h);
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace stylekit
