#pragma once

#include "nncl/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nncl {

enum class DType { f32, f64 };

struct Tensor {
    std::string name;
    std::vector<std::int64_t> shape;
    DType dtype = DType::f32;
    std::vector<double> data; // row-major

    std::int64_t numel() const;
};

/// Named-tensor archive.
///
/// Layout on disk:
///   bytes 0..7   magic "NNCLTA01"
///   bytes 8..15  little-endian u64 length L of the JSON manifest
///   next L bytes UTF-8 JSON: {"metadata": {...}, "tensors": [{"name", "shape",
///                "dtype", "offset", "nbytes"}, ...]}
///   remainder    raw tensor blobs, row-major little-endian, concatenated;
///                offsets are relative to the start of this region.
class TensorArchive {
public:
    nlohmann::json metadata = nlohmann::json::object();

    const std::vector<Tensor>& tensors() const { return tensors_; }
    bool contains(const std::string& name) const;
    const Tensor& at(const std::string& name) const;

    /// Adds or replaces a tensor.
    void put(Tensor tensor);

    template <typename Derived>
    void put_matrix(const std::string& name, const Eigen::MatrixBase<Derived>& m,
                    DType dtype = DType::f32, bool as_vector = false)
    {
        Tensor t;
        t.name = name;
        t.dtype = dtype;
        if (as_vector)
            t.shape = {static_cast<std::int64_t>(m.size())};
        else
            t.shape = {static_cast<std::int64_t>(m.rows()), static_cast<std::int64_t>(m.cols())};
        t.data.reserve(static_cast<std::size_t>(m.size()));
        for (Index r = 0; r < m.rows(); ++r)
            for (Index c = 0; c < m.cols(); ++c)
                t.data.push_back(static_cast<double>(m(r, c)));
        if (dtype == DType::f32)
            for (auto& v : t.data)
                v = static_cast<double>(static_cast<float>(v));
        put(std::move(t));
    }

    /// Reads a tensor into a rows x cols matrix; the element count must match.
    template <typename Scalar>
    Matrix<Scalar> matrix(const std::string& name, Index rows, Index cols) const
    {
        const auto& t = at(name);
        require(t.numel() == rows * cols, "archive tensor '" + name + "' has "
                                              + std::to_string(t.numel())
                                              + " elements, expected "
                                              + std::to_string(rows * cols));
        Matrix<Scalar> m(rows, cols);
        for (Index i = 0; i < m.size(); ++i)
            m.data()[i] = static_cast<Scalar>(t.data[static_cast<std::size_t>(i)]);
        return m;
    }

    void save(const std::filesystem::path& path) const;
    static TensorArchive load(const std::filesystem::path& path);

private:
    std::vector<Tensor> tensors_;
};

std::string to_string(DType d);

} // namespace nncl
