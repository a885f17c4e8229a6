#include "nncl/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace nncl {

namespace {

constexpr char kMagic[8] = {'N', 'N', 'C', 'L', 'T', 'A', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "tensor archive I/O assumes a little-endian host");

std::size_t element_size(DType d)
{
    return d == DType::f32 ? 4 : 8;
}

DType dtype_from_string(const std::string& s)
{
    if (s == "f32")
        return DType::f32;
    if (s == "f64")
        return DType::f64;
    throw RuntimeError("tensor archive: unsupported dtype '" + s + "'");
}

} // namespace

std::string to_string(DType d)
{
    return d == DType::f32 ? "f32" : "f64";
}

std::int64_t Tensor::numel() const
{
    std::int64_t n = 1;
    for (auto s : shape)
        n *= s;
    return n;
}

bool TensorArchive::contains(const std::string& name) const
{
    return std::any_of(tensors_.begin(), tensors_.end(),
                       [&](const Tensor& t) { return t.name == name; });
}

const Tensor& TensorArchive::at(const std::string& name) const
{
    for (const auto& t : tensors_)
        if (t.name == name)
            return t;
    throw RuntimeError("tensor archive has no tensor named '" + name + "'");
}

void TensorArchive::put(Tensor tensor)
{
    require(static_cast<std::int64_t>(tensor.data.size()) == tensor.numel(),
            "tensor '" + tensor.name + "': data size does not match shape");
    for (auto& t : tensors_)
        if (t.name == tensor.name) {
            t = std::move(tensor);
            return;
        }
    tensors_.push_back(std::move(tensor));
}

void TensorArchive::save(const std::filesystem::path& path) const
{
    nlohmann::json entries = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& t : tensors_) {
        const std::uint64_t nbytes = static_cast<std::uint64_t>(t.numel()) * element_size(t.dtype);
        entries.push_back({{"name", t.name},
                           {"shape", t.shape},
                           {"dtype", to_string(t.dtype)},
                           {"offset", offset},
                           {"nbytes", nbytes}});
        offset += nbytes;
    }
    nlohmann::json header = {{"metadata", metadata}, {"tensors", entries}};
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw RuntimeError("cannot write tensor archive " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : tensors_) {
        if (t.dtype == DType::f32) {
            std::vector<float> buf(t.data.begin(), t.data.end());
            out.write(reinterpret_cast<const char*>(buf.data()),
                      static_cast<std::streamsize>(buf.size() * sizeof(float)));
        } else {
            out.write(reinterpret_cast<const char*>(t.data.data()),
                      static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        }
    }
    if (!out)
        throw RuntimeError("failed writing tensor archive " + path.string());
}

TensorArchive TensorArchive::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw RuntimeError("file not found: " + path.string());
    char magic[8];
    std::uint64_t len = 0;
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw RuntimeError(path.string() + " is not a tensor archive");
    if (!in.read(reinterpret_cast<char*>(&len), sizeof(len)))
        throw RuntimeError(path.string() + ": truncated header");
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len)))
        throw RuntimeError(path.string() + ": truncated manifest");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw RuntimeError(path.string() + ": malformed manifest: " + e.what());
    }
    std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    TensorArchive archive;
    archive.metadata = header.value("metadata", nlohmann::json::object());
    for (const auto& e : header.at("tensors")) {
        Tensor t;
        t.name = e.at("name").get<std::string>();
        t.shape = e.at("shape").get<std::vector<std::int64_t>>();
        t.dtype = dtype_from_string(e.at("dtype").get<std::string>());
        const auto offset = e.at("offset").get<std::uint64_t>();
        const auto nbytes = e.at("nbytes").get<std::uint64_t>();
        const auto n = static_cast<std::uint64_t>(t.numel());
        if (nbytes != n * element_size(t.dtype) || offset + nbytes > blob.size())
            throw RuntimeError(path.string() + ": tensor '" + t.name + "' exceeds the data region");
        t.data.resize(n);
        const char* src = blob.data() + offset;
        if (t.dtype == DType::f32) {
            for (std::uint64_t i = 0; i < n; ++i) {
                float v;
                std::memcpy(&v, src + i * sizeof(float), sizeof(float));
                t.data[i] = v;
            }
        } else {
            std::memcpy(t.data.data(), src, nbytes);
        }
        archive.tensors_.push_back(std::move(t));
    }
    return archive;
}

} // namespace nncl
