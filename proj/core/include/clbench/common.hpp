#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace clbench {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Rng = std::mt19937_64;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Schema, merge, or validation failure. `key_path()` is the dotted path of
/// the offending key, empty when the problem is not tied to one key.
class ConfigError : public Error {
public:
    ConfigError(std::string key_path, const std::string& what)
        : Error(key_path.empty() ? what : key_path + ": " + what), key_path_(std::move(key_path)) {}

    [[nodiscard]] const std::string& key_path() const noexcept { return key_path_; }

private:
    std::string key_path_;
};

class DataError : public Error {
public:
    using Error::Error;
};

/// Learner hooks invoked out of order.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Method is registered but not implemented in this library.
class UnsupportedMethod : public Error {
public:
    using Error::Error;
};

class InfeasibleBudget : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// FNV-1a; stable across platforms, used for seeds derived from names and digests.
[[nodiscard]] constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t hash = 14695981039346656037ull;
    for (const char c : text) {
        hash ^= static_cast<std::uint8_t>(c);
        hash *= 1099511628211ull;
    }
    return hash;
}

/// Child seed for an independent stream, e.g. derive_seed(seed, "buffer").
[[nodiscard]] inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) noexcept {
    std::uint64_t z = seed ^ fnv1a(stream);
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Uniform integer in [0, n). Avoids std::uniform_int_distribution so that
/// streams are identical across standard library implementations.
[[nodiscard]] inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    if (n == 0) {
        throw std::invalid_argument("uniform_index: empty range");
    }
    // 2^64 mod n; draws at or above 2^64 - rem would bias the low residues.
    const std::uint64_t rem = (Rng::max() % n + 1) % n;
    std::uint64_t draw = rng();
    if (rem != 0) {
        const std::uint64_t limit = Rng::max() - rem + 1;
        while (draw >= limit) {
            draw = rng();
        }
    }
    return draw % n;
}

/// Fisher-Yates with uniform_index.
template <typename Container>
void shuffle_in_place(Container& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

/// Uniform double in [0, 1) from the top 53 bits.
[[nodiscard]] inline double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller; portable unlike std::normal_distribution.
[[nodiscard]] inline double standard_normal(Rng& rng) {
    double u1 = uniform_unit(rng);
    while (u1 <= 0.0) {
        u1 = uniform_unit(rng);
    }
    const double u2 = uniform_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace clbench
