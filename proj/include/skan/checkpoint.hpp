#pragma once

// Versioned binary model container.
//
//   "SKANCKPT" | u32 version | u32 layer count | layers...
//
// Each layer starts with its kind string. Integers are little-endian, reals
// are little-endian IEEE-754 binary64, strings are u32 length + bytes.
// Basis descriptors are written as kind name, degree, range and a named
// hyperparameter list.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "skan/basis.hpp"
#include "skan/model.hpp"

namespace skan {

inline constexpr char kCheckpointMagic[8] = {'S', 'K', 'A', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& os) : os_(os) {}
    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v);
    void str(const std::string& s);
    void raw(const void* data, std::size_t n);
    void descriptor(const BasisDescriptor& d);
    void tensor(const Tensor& t);

private:
    std::ostream& os_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& is) : is_(is) {}
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64();
    std::string str();
    void raw(void* data, std::size_t n);
    BasisDescriptor descriptor();
    Tensor tensor();
    std::uint64_t offset() const { return offset_; }

private:
    std::istream& is_;
    std::uint64_t offset_ = 0;
};

std::unique_ptr<Layer> read_layer(BinaryReader& in);

void write_model(std::ostream& os, const Model& model);
Model read_model(std::istream& is);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace skan
