#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace kf {

// Wire codes are part of the tensor file format.
enum class DType : std::uint8_t { F32 = 0, I32 = 1, I64 = 2, U8 = 3, Bool = 4 };

std::string_view to_string(DType d);
std::optional<DType> parse_dtype(std::string_view name);
std::size_t element_size(DType d);

using Shape = std::vector<std::uint32_t>;

std::size_t shape_elements(const Shape& shape);

// Dense row-major tensor. Bool elements are stored as 0/1 bytes.
class Tensor {
public:
    using Storage = std::variant<std::vector<float>, std::vector<std::int32_t>, std::vector<std::int64_t>,
                                 std::vector<std::uint8_t>>;

    Tensor() : Tensor(DType::F32, {0}, std::vector<float>{}) {}
    // Throws InvalidArgument when the storage type or length disagrees with dtype/shape.
    Tensor(DType dtype, Shape shape, Storage data);

    static Tensor f32(Shape shape, std::vector<float> values) { return {DType::F32, std::move(shape), std::move(values)}; }
    static Tensor i32(Shape shape, std::vector<std::int32_t> v) { return {DType::I32, std::move(shape), std::move(v)}; }
    static Tensor i64(Shape shape, std::vector<std::int64_t> v) { return {DType::I64, std::move(shape), std::move(v)}; }
    static Tensor u8(Shape shape, std::vector<std::uint8_t> v) { return {DType::U8, std::move(shape), std::move(v)}; }
    static Tensor boolean(Shape shape, std::vector<std::uint8_t> v) { return {DType::Bool, std::move(shape), std::move(v)}; }

    DType dtype() const { return dtype_; }
    const Shape& shape() const { return shape_; }
    std::size_t size() const;
    bool is_integral() const { return dtype_ != DType::F32; }

    template <class T>
    std::span<const T> values() const {
        return std::get<std::vector<T>>(data_);
    }
    template <class T>
    std::span<T> mutable_values() {
        return std::get<std::vector<T>>(data_);
    }

    double as_double(std::size_t i) const;
    std::int64_t as_int(std::size_t i) const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    DType dtype_;
    Shape shape_;
    Storage data_;
};

inline constexpr char kTensorMagic[4] = {'K', 'F', 'T', 'N'};

// Bit-exact file format: "KFTN", u8 dtype, u8 rank, u32 LE dims[rank], raw LE data.
std::vector<std::byte> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::byte> bytes);  // MalformedTensor
Tensor read_tensor(const std::filesystem::path& path);   // IoError, MalformedTensor
void write_tensor(const std::filesystem::path& path, const Tensor& t);

}  // namespace kf
