#include "ssfnet/params.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "ssfnet/error.hpp"

namespace ssfnet {

Param& ParamStore::add(const std::string& name, Tensor init, ParamRole role) {
    if (params_.count(name) != 0) throw ShapeError("duplicate parameter name: " + name);
    Param p;
    p.value = std::move(init);
    p.role = role;
    return params_.emplace(name, std::move(p)).first->second;
}

Param& ParamStore::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ShapeError("unknown parameter: " + name);
    return it->second;
}

const Param& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ShapeError("unknown parameter: " + name);
    return it->second;
}

Var ParamStore::use(const std::string& name) {
    Param& p = get(name);
    Var v(p.value, p.trainable() && grad_enabled());
    if (v.requires_grad()) v.node()->param = &p;
    return v;
}

void ParamStore::zero_grad() {
    for (auto& [_, p] : params_) p.grad = Tensor();
}

std::size_t ParamStore::set_frozen(const std::string& prefix, bool frozen) {
    std::size_t count = 0;
    for (auto& [name, p] : params_) {
        if (name.rfind(prefix, 0) == 0) {
            p.frozen = frozen;
            ++count;
        }
    }
    return count;
}

std::size_t ParamStore::trainable_count() const {
    std::size_t count = 0;
    for (const auto& [_, p] : params_) count += p.trainable() ? 1 : 0;
    return count;
}

std::map<std::string, Tensor> ParamStore::values() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, p] : params_) out.emplace(name, p.value);
    return out;
}

namespace {

constexpr char kMagic[8] = {'S', 'S', 'F', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::filesystem::path& path) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("truncated checkpoint: " + path.string());
    return v;
}

}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write checkpoint: " + path.string());
    os.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(os, kVersion);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(metadata.size()));
    os.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
    write_pod<std::uint64_t>(os, arrays.size());
    for (const auto& [name, t] : arrays) {
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::int32_t>(os, t.shape.n);
        write_pod<std::int32_t>(os, t.shape.h);
        write_pod<std::int32_t>(os, t.shape.w);
        write_pod<std::int32_t>(os, t.shape.c);
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!os) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint: " + path.string());
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("not a checkpoint file: " + path.string());
    }
    if (auto v = read_pod<std::uint32_t>(is, path); v != kVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(v));
    }
    Checkpoint ckpt;
    auto meta_len = read_pod<std::uint32_t>(is, path);
    ckpt.metadata.resize(meta_len);
    is.read(ckpt.metadata.data(), meta_len);
    auto count = read_pod<std::uint64_t>(is, path);
    for (std::uint64_t i = 0; i < count; ++i) {
        auto name_len = read_pod<std::uint32_t>(is, path);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        Shape s;
        s.n = read_pod<std::int32_t>(is, path);
        s.h = read_pod<std::int32_t>(is, path);
        s.w = read_pod<std::int32_t>(is, path);
        s.c = read_pod<std::int32_t>(is, path);
        if (s.n < 0 || s.h < 0 || s.w < 0 || s.c < 0) throw DataError("corrupt array shape: " + name);
        Tensor t(s);
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!is) throw DataError("truncated checkpoint array: " + name);
        ckpt.arrays.emplace(std::move(name), std::move(t));
    }
    return ckpt;
}

void export_params(const ParamStore& store, Checkpoint& ckpt, bool include_optimizer) {
    for (const auto& [name, p] : store.items()) {
        ckpt.arrays[name] = p.value;
        if (include_optimizer && !p.momentum.empty()) ckpt.arrays["optim.momentum." + name] = p.momentum;
    }
}

void import_params(ParamStore& store, const Checkpoint& ckpt, bool partial) {
    const std::string optim_prefix = "optim.momentum.";
    std::vector<std::string> extra;
    for (const auto& [name, t] : ckpt.arrays) {
        if (name.rfind("optim.", 0) == 0) continue;
        if (!store.contains(name)) {
            extra.push_back(name);
            continue;
        }
        Param& p = store.get(name);
        if (!(p.value.shape == t.shape)) {
            throw DataError("checkpoint array " + name + " has shape " + t.shape.str() +
                            ", model expects " + p.value.shape.str());
        }
    }
    std::vector<std::string> missing;
    for (const auto& [name, _] : store.items()) {
        if (ckpt.arrays.count(name) == 0) missing.push_back(name);
    }
    if (!partial && (!extra.empty() || !missing.empty())) {
        std::string msg = "checkpoint/model mismatch:";
        for (const auto& n : missing) msg += " missing=" + n;
        for (const auto& n : extra) msg += " unexpected=" + n;
        throw DataError(msg);
    }
    for (auto& [name, p] : store.items()) {
        auto it = ckpt.arrays.find(name);
        if (it != ckpt.arrays.end()) p.value = it->second;
        auto mit = ckpt.arrays.find(optim_prefix + name);
        if (mit != ckpt.arrays.end() && mit->second.shape == p.value.shape) p.momentum = mit->second;
    }
}

}  // namespace ssfnet
