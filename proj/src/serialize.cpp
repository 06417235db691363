#include "symconv/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace symconv {

static_assert(std::endian::native == std::endian::little,
              "tensor container assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'Y', 'M', 'T'};
constexpr std::uint8_t kTagF32 = 0;
constexpr std::uint8_t kTagF64 = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw FormatError("tensor container: truncated header");
    return v;
}

template <typename T>
void write_tensor_impl(std::ostream& os, const TensorT<T>& t, std::uint8_t tag) {
    os.write(kMagic, 4);
    write_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
    os.put(static_cast<char>(tag));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(T)));
    if (!os) throw FormatError("tensor container: write failed");
}

template <typename T>
TensorT<T> read_buffer(std::istream& is, Shape shape) {
    TensorT<T> t(std::move(shape));
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(T)));
    if (!is) throw FormatError("tensor container: truncated buffer");
    return t;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) { write_tensor_impl(os, t, kTagF32); }
void write_tensor(std::ostream& os, const Tensor64& t) { write_tensor_impl(os, t, kTagF64); }

AnyTensor read_tensor(std::istream& is) {
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("tensor container: bad magic, expected \"SYMT\"");
    const std::uint32_t rank = read_u32(is);
    if (rank > 32) throw FormatError("tensor container: implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = read_u32(is);
    const int tag = is.get();
    if (tag == kTagF32) return read_buffer<float>(is, std::move(shape));
    if (tag == kTagF64) return read_buffer<double>(is, std::move(shape));
    throw FormatError("tensor container: unknown precision tag " + std::to_string(tag));
}

Tensor read_tensor_f32(std::istream& is) {
    AnyTensor t = read_tensor(is);
    if (auto* p = std::get_if<Tensor>(&t)) return std::move(*p);
    throw FormatError("tensor container: expected 32-bit floats, found 64-bit");
}

Tensor64 read_tensor_f64(std::istream& is) {
    AnyTensor t = read_tensor(is);
    if (auto* p = std::get_if<Tensor64>(&t)) return std::move(*p);
    throw FormatError("tensor container: expected 64-bit floats, found 32-bit");
}

namespace {
std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + path);
    return os;
}
}  // namespace

void save_tensor(const std::string& path, const Tensor& t) {
    auto os = open_out(path);
    write_tensor(os, t);
}

void save_tensor(const std::string& path, const Tensor64& t) {
    auto os = open_out(path);
    write_tensor(os, t);
}

AnyTensor load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open for reading: " + path);
    return read_tensor(is);
}

}  // namespace symconv
