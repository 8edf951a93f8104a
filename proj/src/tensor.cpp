#include "kf/tensor.hpp"

#include "kf/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace kf {

std::string_view to_string(DType d) {
    switch (d) {
        case DType::F32: return "F32";
        case DType::I32: return "I32";
        case DType::I64: return "I64";
        case DType::U8: return "U8";
        case DType::Bool: return "Bool";
    }
    return "?";
}

std::optional<DType> parse_dtype(std::string_view name) {
    for (auto d : {DType::F32, DType::I32, DType::I64, DType::U8, DType::Bool})
        if (to_string(d) == name) return d;
    return std::nullopt;
}

std::size_t element_size(DType d) {
    switch (d) {
        case DType::F32:
        case DType::I32: return 4;
        case DType::I64: return 8;
        case DType::U8:
        case DType::Bool: return 1;
    }
    return 1;
}

std::size_t shape_elements(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

namespace {

std::size_t storage_index(DType d) {
    switch (d) {
        case DType::F32: return 0;
        case DType::I32: return 1;
        case DType::I64: return 2;
        case DType::U8:
        case DType::Bool: return 3;
    }
    return 3;
}

template <class T>
void append_le(std::vector<std::byte>& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::byte raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    out.insert(out.end(), raw, raw + sizeof(T));
}

template <class T>
T load_le(const std::byte* p) {
    std::byte raw[sizeof(T)];
    std::memcpy(raw, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
}

template <class T>
std::vector<T> load_values(const std::byte* p, std::size_t n) {
    std::vector<T> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = load_le<T>(p + i * sizeof(T));
    return v;
}

}  // namespace

Tensor::Tensor(DType dtype, Shape shape, Storage data) : dtype_(dtype), shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.index() != storage_index(dtype_))
        fail(ErrorCode::InvalidArgument, "tensor storage does not match dtype " + std::string(to_string(dtype_)));
    if (size() != shape_elements(shape_))
        fail(ErrorCode::InvalidArgument, "tensor has " + std::to_string(size()) + " elements, shape needs " +
                                             std::to_string(shape_elements(shape_)));
    if (dtype_ == DType::Bool) {
        for (auto b : std::get<std::vector<std::uint8_t>>(data_))
            if (b > 1) fail(ErrorCode::InvalidArgument, "Bool tensor element outside {0,1}");
    }
}

std::size_t Tensor::size() const {
    return std::visit([](const auto& v) { return v.size(); }, data_);
}

double Tensor::as_double(std::size_t i) const {
    return std::visit([i](const auto& v) { return static_cast<double>(v.at(i)); }, data_);
}

std::int64_t Tensor::as_int(std::size_t i) const {
    return std::visit([i](const auto& v) { return static_cast<std::int64_t>(v.at(i)); }, data_);
}

std::vector<std::byte> encode_tensor(const Tensor& t) {
    if (t.shape().size() > 255) fail(ErrorCode::InvalidArgument, "tensor rank exceeds 255");
    std::vector<std::byte> out;
    out.reserve(6 + 4 * t.shape().size() + t.size() * element_size(t.dtype()));
    for (char c : kTensorMagic) out.push_back(static_cast<std::byte>(c));
    out.push_back(static_cast<std::byte>(t.dtype()));
    out.push_back(static_cast<std::byte>(t.shape().size()));
    for (auto d : t.shape()) append_le<std::uint32_t>(out, d);
    switch (t.dtype()) {
        case DType::F32:
            for (float v : t.values<float>()) append_le(out, v);
            break;
        case DType::I32:
            for (auto v : t.values<std::int32_t>()) append_le(out, v);
            break;
        case DType::I64:
            for (auto v : t.values<std::int64_t>()) append_le(out, v);
            break;
        case DType::U8:
        case DType::Bool:
            for (auto v : t.values<std::uint8_t>()) out.push_back(static_cast<std::byte>(v));
            break;
    }
    return out;
}

Tensor decode_tensor(std::span<const std::byte> bytes) {
    if (bytes.size() < 6 || std::memcmp(bytes.data(), kTensorMagic, 4) != 0)
        fail(ErrorCode::MalformedTensor, "missing KFTN magic");
    auto code = static_cast<std::uint8_t>(bytes[4]);
    if (code > 4) fail(ErrorCode::MalformedTensor, "unknown dtype code " + std::to_string(code));
    auto dtype = static_cast<DType>(code);
    std::size_t rank = static_cast<std::uint8_t>(bytes[5]);
    std::size_t offset = 6;
    if (bytes.size() < offset + 4 * rank) fail(ErrorCode::MalformedTensor, "truncated shape");
    Shape shape(rank);
    for (std::size_t i = 0; i < rank; ++i) shape[i] = load_le<std::uint32_t>(bytes.data() + offset + 4 * i);
    offset += 4 * rank;
    std::size_t n = shape_elements(shape);
    std::size_t need = n * element_size(dtype);
    if (bytes.size() - offset != need) {
        fail(ErrorCode::MalformedTensor, "payload is " + std::to_string(bytes.size() - offset) + " bytes, expected " +
                                             std::to_string(need));
    }
    const std::byte* p = bytes.data() + offset;
    try {
        switch (dtype) {
            case DType::F32: return Tensor(dtype, shape, load_values<float>(p, n));
            case DType::I32: return Tensor(dtype, shape, load_values<std::int32_t>(p, n));
            case DType::I64: return Tensor(dtype, shape, load_values<std::int64_t>(p, n));
            case DType::U8:
            case DType::Bool: return Tensor(dtype, shape, load_values<std::uint8_t>(p, n));
        }
    } catch (const Error& e) {
        fail(ErrorCode::MalformedTensor, e.detail());
    }
    fail(ErrorCode::MalformedTensor, "unreachable dtype");
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read tensor " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_tensor(std::as_bytes(std::span(raw)));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::MalformedTensor) fail(ErrorCode::MalformedTensor, path.string() + ": " + e.detail());
        throw;
    }
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
    auto bytes = encode_tensor(t);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write tensor " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace kf
