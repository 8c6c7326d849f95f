#include "pipeline/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "core/error.hpp"

namespace bsldm::pipeline {

namespace {

constexpr char kMagic[8] = {'B', 'S', 'L', 'D', 'M', 'C', 'K', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    require(bool(is), Status::Io, "checkpoint truncated");
    return v;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

const Tensor& Checkpoint::need(const std::string& name) const {
    const Tensor* t = find(name);
    require(t != nullptr, Status::Precondition, "checkpoint missing tensor: " + name);
    return *t;
}

void Checkpoint::save(const std::string& path) const {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        require(os.good(), Status::Io, "cannot write " + tmp);
        os.write(kMagic, sizeof kMagic);
        std::string meta_s = meta.dump();
        write_u32(os, std::uint32_t(meta_s.size()));
        os.write(meta_s.data(), std::streamsize(meta_s.size()));
        write_u32(os, std::uint32_t(tensors.size()));
        for (const auto& [name, t] : tensors) {
            write_u32(os, std::uint32_t(name.size()));
            os.write(name.data(), std::streamsize(name.size()));
            write_u32(os, std::uint32_t(t.ndim()));
            for (int d = 0; d < t.ndim(); ++d) write_u32(os, std::uint32_t(t.dim(d)));
            os.write(reinterpret_cast<const char*>(t.data()),
                     std::streamsize(t.size() * sizeof(real)));
        }
        require(os.good(), Status::Io, "write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), Status::Io, "cannot open checkpoint " + path);
    char magic[8];
    is.read(magic, sizeof magic);
    require(bool(is) && std::memcmp(magic, kMagic, sizeof magic) == 0, Status::Io,
            "not a checkpoint file: " + path);

    Checkpoint ck;
    std::uint32_t meta_len = read_u32(is);
    std::string meta_s(meta_len, '\0');
    is.read(meta_s.data(), meta_len);
    require(bool(is), Status::Io, "checkpoint truncated");
    ck.meta = nlohmann::json::parse(meta_s, nullptr, false);
    require(!ck.meta.is_discarded(), Status::Io, "bad checkpoint metadata in " + path);

    std::uint32_t n_tensors = read_u32(is);
    ck.tensors.reserve(n_tensors);
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        std::uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        std::uint32_t ndim = read_u32(is);
        require(ndim >= 1 && ndim <= 8, Status::Io, "bad tensor rank in checkpoint");
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = int(read_u32(is));
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data()), std::streamsize(t.size() * sizeof(real)));
        require(bool(is), Status::Io, "checkpoint truncated");
        ck.tensors.emplace_back(std::move(name), std::move(t));
    }
    return ck;
}

void ck_put_params(Checkpoint& ck, const std::string& prefix, const std::vector<nn::Param*>& ps) {
    for (const nn::Param* p : ps) ck.add(prefix + "/" + p->name, p->value);
}

void ck_get_params(const Checkpoint& ck, const std::string& prefix,
                   const std::vector<nn::Param*>& ps) {
    for (nn::Param* p : ps) {
        const Tensor& t = ck.need(prefix + "/" + p->name);
        require(t.same_shape(p->value), Status::Precondition,
                "checkpoint shape mismatch for " + p->name + ": " + t.shape_str() + " vs " +
                    p->value.shape_str());
        p->value = t;
    }
}

void ck_put_adam(Checkpoint& ck, const std::string& prefix, const nn::Adam& opt,
                 const std::vector<nn::Param*>& ps) {
    require(opt.m.size() == ps.size(), Status::InvalidArgument, "optimizer/param count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        ck.add(prefix + "/m/" + ps[i]->name, opt.m[i]);
        ck.add(prefix + "/v/" + ps[i]->name, opt.v[i]);
    }
    ck.meta[prefix + "_steps"] = opt.t;
}

void ck_get_adam(const Checkpoint& ck, const std::string& prefix, nn::Adam& opt,
                 const std::vector<nn::Param*>& ps) {
    require(opt.m.size() == ps.size(), Status::InvalidArgument, "optimizer/param count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        opt.m[i] = ck.need(prefix + "/m/" + ps[i]->name);
        opt.v[i] = ck.need(prefix + "/v/" + ps[i]->name);
    }
    require(ck.meta.contains(prefix + "_steps"), Status::Precondition,
            "checkpoint missing " + prefix + "_steps");
    opt.t = ck.meta[prefix + "_steps"].get<std::int64_t>();
}

void ck_put_ema(Checkpoint& ck, const std::string& prefix, const nn::Ema& ema,
                const std::vector<nn::Param*>& ps) {
    require(ema.shadow.size() == ps.size(), Status::InvalidArgument, "ema/param count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) ck.add(prefix + "/" + ps[i]->name, ema.shadow[i]);
}

void ck_get_ema(const Checkpoint& ck, const std::string& prefix, nn::Ema& ema,
                const std::vector<nn::Param*>& ps) {
    require(ema.shadow.size() == ps.size(), Status::InvalidArgument, "ema/param count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) ema.shadow[i] = ck.need(prefix + "/" + ps[i]->name);
}

}  // namespace bsldm::pipeline
