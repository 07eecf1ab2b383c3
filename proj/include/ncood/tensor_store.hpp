#pragma once

#include "ncood/linalg.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ncood {

// NCT1 binary tensor format, little-endian throughout:
//
//   offset 0  "NCT1"            magic
//   offset 4  u8                format version (1)
//   offset 5  u8                dtype code (1 = f32, 2 = f64, 3 = i64)
//   offset 6  u8                ndim (1..8)
//   offset 7  u64 x ndim        extents
//   then      row-major payload
//
// The header is therefore 7 + 8*ndim bytes.

enum class DType : std::uint8_t { f32 = 1, f64 = 2, i64 = 3 };

inline constexpr std::size_t kMaxRank = 8;
inline constexpr std::uint8_t kFormatVersion = 1;

std::size_t dtype_size(DType dtype);
const char* dtype_name(DType dtype);

class Tensor {
public:
    using Storage = std::variant<std::vector<float>, std::vector<double>, std::vector<std::int64_t>>;

    /// Validates rank (1..8) and that the element count matches the shape.
    Tensor(std::vector<std::uint64_t> shape, Storage data);

    static Tensor from_matrix(const Matrix& m, DType dtype = DType::f64);
    static Tensor from_vector(const Vector& v, DType dtype = DType::f64);
    static Tensor from_labels(const Labels& labels);

    DType dtype() const;
    const std::vector<std::uint64_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const;
    const Storage& storage() const { return data_; }

    template <typename T>
    std::span<const T> values() const {
        return std::get<std::vector<T>>(data_);
    }

    /// 2-D float tensor as a double matrix.
    Matrix to_matrix() const;
    /// 1-D float tensor as a double vector.
    Vector to_vector() const;
    /// 1-D i64 tensor.
    Labels to_labels() const;

    /// Bit-exact equality: dtype, shape and payload bytes.
    friend bool operator==(const Tensor& a, const Tensor& b);

private:
    std::vector<std::uint64_t> shape_;
    Storage data_;
};

std::size_t header_size(std::size_t rank);
std::size_t payload_size(const Tensor& t);

/// Writes header and payload; returns the number of bytes emitted.
std::size_t write_tensor(const Tensor& t, std::ostream& sink);
Tensor read_tensor(std::istream& source);

void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

// Bundles: a directory holding one tensor file per role and a manifest of
// "key = value" lines. The standard roles (features, labels, weights, bias)
// appear as bare keys; any other tensor role is written as "tensor.<role>".
// Every other key lands in metadata.

inline constexpr const char* kManifestFile = "manifest.txt";

struct BundleManifest {
    std::map<std::string, std::string> entries;  // role -> relative tensor path
    std::string dataset_name;
    std::map<std::string, std::string> metadata;
};

using TensorMap = std::map<std::string, Tensor>;

struct Bundle {
    BundleManifest manifest;
    TensorMap tensors;

    bool has(const std::string& role) const { return tensors.count(role) != 0; }
    /// Throws ContractError naming the role when absent.
    const Tensor& at(const std::string& role) const;
};

bool is_standard_role(const std::string& role);

/// Manifest naming "<role>.nct" for every tensor in the map.
BundleManifest make_manifest(const std::string& dataset_name, const TensorMap& tensors);

/// Checks the cross-tensor invariants (labels length vs features rows).
void validate_bundle(const BundleManifest& manifest, const TensorMap& tensors);

std::filesystem::path write_bundle(const BundleManifest& manifest, const TensorMap& tensors,
                                   const std::filesystem::path& dir);

/// Accepts the manifest file itself or the directory holding it.
Bundle read_bundle(const std::filesystem::path& manifest_path);

std::string format_manifest(const BundleManifest& manifest);
BundleManifest parse_manifest(std::istream& in);

}  // namespace ncood
