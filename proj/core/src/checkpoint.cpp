#include <bit>
#include <cstring>
#include <fstream>

#include "clbench/model.hpp"

namespace clbench {

namespace {

constexpr char kMagic[4] = {'C', 'L', 'B', 'A'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t value) { out.write(reinterpret_cast<const char*>(&value), 4); }

std::uint32_t get_u32(std::istream& in) {
    std::uint32_t value = 0;
    in.read(reinterpret_cast<char*>(&value), 4);
    if (!in) {
        throw DataError("truncated checkpoint");
    }
    return value;
}

}  // namespace

void save_checkpoint(const std::map<std::string, Matrix>& arrays, const ParameterCensus& census_info,
                     const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    std::ofstream out(directory / "arrays.bin", std::ios::binary);
    if (!out) {
        throw DataError("cannot write checkpoint in " + directory.string());
    }
    out.write(kMagic, 4);
    put_u32(out, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& [name, array] : arrays) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<std::uint32_t>(array.rows()));
        put_u32(out, static_cast<std::uint32_t>(array.cols()));
        for (Eigen::Index r = 0; r < array.rows(); ++r) {
            for (Eigen::Index c = 0; c < array.cols(); ++c) {
                const auto value = static_cast<float>(array(r, c));
                out.write(reinterpret_cast<const char*>(&value), 4);
            }
        }
    }
    std::ofstream(directory / "census.json") << census_info.to_json().dump(2) << '\n';
}

std::map<std::string, Matrix> load_checkpoint_arrays(const std::filesystem::path& directory) {
    std::ifstream in(directory / "arrays.bin", std::ios::binary);
    if (!in) {
        throw DataError("no checkpoint in " + directory.string());
    }
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("not a checkpoint file: " + (directory / "arrays.bin").string());
    }
    std::map<std::string, Matrix> arrays;
    const auto count = get_u32(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name(get_u32(in), '\0');
        in.read(name.data(), static_cast<std::streamsize>(name.size()));
        const auto rows = get_u32(in);
        const auto cols = get_u32(in);
        Matrix array(rows, cols);
        for (std::uint32_t r = 0; r < rows; ++r) {
            for (std::uint32_t c = 0; c < cols; ++c) {
                float value = 0.0F;
                in.read(reinterpret_cast<char*>(&value), 4);
                array(r, c) = value;
            }
        }
        if (!in) {
            throw DataError("truncated checkpoint array '" + name + "'");
        }
        arrays.emplace(std::move(name), std::move(array));
    }
    return arrays;
}

}  // namespace clbench
