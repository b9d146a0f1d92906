#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "clbench/config.hpp"

namespace clbench {

struct ImageShape {
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::int64_t channels = 0;

    [[nodiscard]] std::int64_t size() const noexcept { return height * width * channels; }
    bool operator==(const ImageShape&) const = default;
};

/// Interleaved (HWC) 8-bit image.
struct Image {
    ImageShape shape;
    std::vector<std::uint8_t> pixels;
};

/// Binary netpbm: P5 (grayscale) or P6 (RGB), maxval 255.
[[nodiscard]] Image read_netpbm(const std::filesystem::path& path);
void write_netpbm(const Image& image, const std::filesystem::path& path);

/// Bilinear resampling with half-pixel centers (align_corners = false).
[[nodiscard]] Image resize_bilinear(const Image& image, std::int64_t height, std::int64_t width);

/// Replicates a single channel into `channels` channels. No-op when already matching.
[[nodiscard]] Image expand_channels(const Image& image, std::int64_t channels);

struct LabeledImage {
    std::vector<std::uint8_t> pixels;
    std::int64_t local_class = 0;
};

/// One source dataset with its own class names and a fixed image shape.
struct Dataset {
    std::string name;
    ImageShape shape;
    std::vector<std::string> class_names;
    std::vector<LabeledImage> train;
    std::vector<LabeledImage> test;
};

/// Reads `<root>/train/<class_name>/*.img` and `<root>/test/<class_name>/*.img`.
/// Class ids follow the lexicographic order of the class folder names.
[[nodiscard]] Dataset load_image_folder(const std::filesystem::path& root, const std::string& name);

/// Deterministic Gaussian-mixture images projected from a latent space.
/// Depends only on `name` and `params`, never on the experiment seed.
[[nodiscard]] Dataset make_synthetic_dataset(const std::string& name, const SyntheticConfig& params);

/// Resolves a dataset identifier: `synth:<tag>` uses the generator, anything
/// else is a folder under `data_root`.
[[nodiscard]] Dataset resolve_dataset(const std::string& identifier, const ExperimentConfig& cfg);

/// Resizes every dataset to the largest spatial size and replicates grayscale
/// to three channels when any dataset is colour.
void harmonize_shapes(std::vector<Dataset>& datasets);

}  // namespace clbench
