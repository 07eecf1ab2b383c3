#include "ncood/tensor_store.hpp"

#include "ncood/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

namespace ncood {

namespace {

constexpr std::array<char, 4> kMagic = {'N', 'C', 'T', '1'};

template <typename T>
T byteswap(T value) {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    std::reverse(bytes.begin(), bytes.end());
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

template <typename T>
T to_little(T value) {
    if constexpr (std::endian::native == std::endian::big) {
        return byteswap(value);
    } else {
        return value;
    }
}

std::uint64_t checked_product(const std::vector<std::uint64_t>& shape) {
    std::uint64_t n = 1;
    for (auto extent : shape) {
        if (extent != 0 && n > std::numeric_limits<std::uint64_t>::max() / extent) {
            throw FormatError("tensor shape overflows 64-bit element count");
        }
        n *= extent;
    }
    return n;
}

std::size_t storage_size(const Tensor::Storage& data) {
    return std::visit([](const auto& v) { return v.size(); }, data);
}

class CountingWriter {
public:
    explicit CountingWriter(std::ostream& out) : out_(out) {}

    void put(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out_) {
            throw IoError("tensor write failed at byte offset " + std::to_string(offset_));
        }
        offset_ += n;
    }

    template <typename T>
    void put_scalar(T value) {
        value = to_little(value);
        put(&value, sizeof(T));
    }

    std::size_t offset() const { return offset_; }

private:
    std::ostream& out_;
    std::size_t offset_ = 0;
};

void read_exact(std::istream& in, void* dst, std::size_t n, const char* what) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw FormatError(std::string("truncated tensor header while reading ") + what);
    }
}

template <typename T>
std::vector<T> read_payload(std::istream& in, std::uint64_t count) {
    const std::uint64_t expected = count * sizeof(T);
    std::vector<T> out;
    // Grow in chunks so a corrupt header cannot force a huge allocation up front.
    constexpr std::uint64_t kChunk = (1u << 20) / sizeof(T);
    std::uint64_t done = 0;
    while (done < count) {
        const std::uint64_t step = std::min(kChunk, count - done);
        out.resize(static_cast<std::size_t>(done + step));
        in.read(reinterpret_cast<char*>(out.data() + done), static_cast<std::streamsize>(step * sizeof(T)));
        const auto got = static_cast<std::uint64_t>(in.gcount());
        if (got != step * sizeof(T)) {
            const std::uint64_t actual = done * sizeof(T) + got;
            throw LengthError("truncated tensor payload: expected " + std::to_string(expected) +
                                  " bytes, got " + std::to_string(actual),
                              expected, actual);
        }
        done += step;
    }
    if constexpr (std::endian::native == std::endian::big) {
        for (auto& v : out) v = byteswap(v);
    }
    return out;
}

}  // namespace

std::size_t dtype_size(DType dtype) {
    switch (dtype) {
        case DType::f32: return 4;
        case DType::f64: return 8;
        case DType::i64: return 8;
    }
    throw FormatError("unknown dtype");
}

const char* dtype_name(DType dtype) {
    switch (dtype) {
        case DType::f32: return "f32";
        case DType::f64: return "f64";
        case DType::i64: return "i64";
    }
    return "?";
}

Tensor::Tensor(std::vector<std::uint64_t> shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.empty() || shape_.size() > kMaxRank) {
        throw ContractError("tensor rank must be in [1, 8], got " + std::to_string(shape_.size()));
    }
    const auto n = checked_product(shape_);
    if (n != storage_size(data_)) {
        throw ContractError("tensor shape holds " + std::to_string(n) + " elements but data has " +
                            std::to_string(storage_size(data_)));
    }
}

Tensor Tensor::from_matrix(const Matrix& m, DType dtype) {
    std::vector<std::uint64_t> shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    const auto n = static_cast<std::size_t>(m.size());
    switch (dtype) {
        case DType::f32: {
            std::vector<float> v(n);
            for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<float>(m.data()[i]);
            return Tensor(std::move(shape), std::move(v));
        }
        case DType::f64:
            return Tensor(std::move(shape), std::vector<double>(m.data(), m.data() + n));
        case DType::i64:
            break;
    }
    throw ContractError("matrices are stored as f32 or f64");
}

Tensor Tensor::from_vector(const Vector& v, DType dtype) {
    std::vector<std::uint64_t> shape = {static_cast<std::uint64_t>(v.size())};
    const auto n = static_cast<std::size_t>(v.size());
    switch (dtype) {
        case DType::f32: {
            std::vector<float> out(n);
            for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(v[static_cast<Eigen::Index>(i)]);
            return Tensor(std::move(shape), std::move(out));
        }
        case DType::f64:
            return Tensor(std::move(shape), std::vector<double>(v.data(), v.data() + n));
        case DType::i64:
            break;
    }
    throw ContractError("vectors are stored as f32 or f64");
}

Tensor Tensor::from_labels(const Labels& labels) {
    return Tensor({static_cast<std::uint64_t>(labels.size())}, labels);
}

DType Tensor::dtype() const {
    switch (data_.index()) {
        case 0: return DType::f32;
        case 1: return DType::f64;
        default: return DType::i64;
    }
}

std::size_t Tensor::size() const { return storage_size(data_); }

Matrix Tensor::to_matrix() const {
    if (rank() != 2) {
        throw ContractError("expected a 2-D tensor, got rank " + std::to_string(rank()));
    }
    Matrix m(static_cast<Eigen::Index>(shape_[0]), static_cast<Eigen::Index>(shape_[1]));
    std::visit(
        [&](const auto& v) {
            using T = typename std::decay_t<decltype(v)>::value_type;
            if constexpr (std::is_same_v<T, std::int64_t>) {
                throw ContractError("expected a floating-point tensor, got i64");
            } else {
                for (std::size_t i = 0; i < v.size(); ++i) m.data()[i] = static_cast<double>(v[i]);
            }
        },
        data_);
    return m;
}

Vector Tensor::to_vector() const {
    if (rank() != 1) {
        throw ContractError("expected a 1-D tensor, got rank " + std::to_string(rank()));
    }
    Vector out(static_cast<Eigen::Index>(shape_[0]));
    std::visit(
        [&](const auto& v) {
            using T = typename std::decay_t<decltype(v)>::value_type;
            if constexpr (std::is_same_v<T, std::int64_t>) {
                throw ContractError("expected a floating-point tensor, got i64");
            } else {
                for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = static_cast<double>(v[i]);
            }
        },
        data_);
    return out;
}

Labels Tensor::to_labels() const {
    if (rank() != 1 || dtype() != DType::i64) {
        throw ContractError("labels must be a 1-D i64 tensor");
    }
    return std::get<std::vector<std::int64_t>>(data_);
}

bool operator==(const Tensor& a, const Tensor& b) {
    if (a.dtype() != b.dtype() || a.shape_ != b.shape_) return false;
    return std::visit(
        [&](const auto& va) {
            using V = std::decay_t<decltype(va)>;
            const auto& vb = std::get<V>(b.data_);
            return va.empty() || std::memcmp(va.data(), vb.data(), va.size() * sizeof(typename V::value_type)) == 0;
        },
        a.data_);
}

std::size_t header_size(std::size_t rank) { return kMagic.size() + 3 + 8 * rank; }

std::size_t payload_size(const Tensor& t) { return t.size() * dtype_size(t.dtype()); }

std::size_t write_tensor(const Tensor& t, std::ostream& sink) {
    CountingWriter w(sink);
    w.put(kMagic.data(), kMagic.size());
    w.put_scalar<std::uint8_t>(kFormatVersion);
    w.put_scalar<std::uint8_t>(static_cast<std::uint8_t>(t.dtype()));
    w.put_scalar<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
    for (auto extent : t.shape()) w.put_scalar<std::uint64_t>(extent);
    std::visit(
        [&](const auto& v) {
            if constexpr (std::endian::native == std::endian::little) {
                if (!v.empty()) w.put(v.data(), v.size() * sizeof(v[0]));
            } else {
                for (auto x : v) w.put_scalar(x);
            }
        },
        t.storage());
    return w.offset();
}

Tensor read_tensor(std::istream& source) {
    std::array<char, 4> magic{};
    read_exact(source, magic.data(), magic.size(), "magic");
    if (magic != kMagic) {
        throw FormatError("bad tensor magic: expected \"NCT1\", got \"" + std::string(magic.data(), magic.size()) +
                          "\"");
    }
    std::array<std::uint8_t, 3> fields{};
    read_exact(source, fields.data(), fields.size(), "version/dtype/ndim");
    const auto [version, code, ndim] = fields;
    if (version != kFormatVersion) {
        throw FormatError("unsupported tensor format version " + std::to_string(version));
    }
    if (code < 1 || code > 3) {
        throw FormatError("unknown dtype code " + std::to_string(code));
    }
    if (ndim < 1 || ndim > kMaxRank) {
        throw FormatError("tensor rank must be in [1, 8], got " + std::to_string(ndim));
    }
    std::vector<std::uint64_t> shape(ndim);
    for (auto& extent : shape) {
        read_exact(source, &extent, sizeof(extent), "extents");
        extent = to_little(extent);
    }
    const auto count = checked_product(shape);
    const auto dtype = static_cast<DType>(code);
    if (count > std::numeric_limits<std::uint64_t>::max() / dtype_size(dtype)) {
        throw FormatError("tensor payload size overflows");
    }
    switch (dtype) {
        case DType::f32: return Tensor(std::move(shape), read_payload<float>(source, count));
        case DType::f64: return Tensor(std::move(shape), read_payload<double>(source, count));
        case DType::i64: return Tensor(std::move(shape), read_payload<std::int64_t>(source, count));
    }
    throw FormatError("unknown dtype");
}

}  // namespace ncood
