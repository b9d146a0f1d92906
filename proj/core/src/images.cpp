#include "clbench/images.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace clbench {
namespace {

std::string read_token(std::istream& in) {
    std::string token;
    char c = 0;
    while (in.get(c)) {
        if (c == '#') {
            std::string ignored;
            std::getline(in, ignored);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!token.empty()) {
                break;
            }
            continue;
        }
        token.push_back(c);
    }
    return token;
}

std::int64_t parse_header_int(std::istream& in, const std::filesystem::path& path) {
    const std::string token = read_token(in);
    try {
        return std::stoll(token);
    } catch (const std::exception&) {
        throw DataError("malformed image header in '" + path.string() + "'");
    }
}

}  // namespace

Image read_netpbm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open image '" + path.string() + "'");
    }
    const std::string magic = read_token(in);
    Image image;
    if (magic == "P5") {
        image.shape.channels = 1;
    } else if (magic == "P6") {
        image.shape.channels = 3;
    } else {
        throw DataError("'" + path.string() + "' is not a binary P5/P6 image");
    }
    image.shape.width = parse_header_int(in, path);
    image.shape.height = parse_header_int(in, path);
    const std::int64_t maxval = parse_header_int(in, path);
    if (image.shape.width <= 0 || image.shape.height <= 0 || maxval != 255) {
        throw DataError("unsupported image geometry in '" + path.string() + "'");
    }
    image.pixels.resize(static_cast<std::size_t>(image.shape.size()));
    in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(image.pixels.size())) {
        throw DataError("truncated pixel data in '" + path.string() + "'");
    }
    return image;
}

void write_netpbm(const Image& image, const std::filesystem::path& path) {
    if (image.shape.channels != 1 && image.shape.channels != 3) {
        throw DataError("netpbm supports 1 or 3 channels");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write image '" + path.string() + "'");
    }
    out << (image.shape.channels == 1 ? "P5" : "P6") << '\n'
        << image.shape.width << ' ' << image.shape.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

Image resize_bilinear(const Image& image, std::int64_t height, std::int64_t width) {
    const auto& in = image.shape;
    if (in.height == height && in.width == width) {
        return image;
    }
    Image out;
    out.shape = {height, width, in.channels};
    out.pixels.resize(static_cast<std::size_t>(out.shape.size()));
    const double scale_y = static_cast<double>(in.height) / static_cast<double>(height);
    const double scale_x = static_cast<double>(in.width) / static_cast<double>(width);
    const auto at = [&](std::int64_t y, std::int64_t x, std::int64_t c) {
        return static_cast<double>(image.pixels[static_cast<std::size_t>((y * in.width + x) * in.channels + c)]);
    };
    for (std::int64_t y = 0; y < height; ++y) {
        const double sy = std::clamp((static_cast<double>(y) + 0.5) * scale_y - 0.5, 0.0, static_cast<double>(in.height - 1));
        const auto y0 = static_cast<std::int64_t>(std::floor(sy));
        const std::int64_t y1 = std::min(y0 + 1, in.height - 1);
        const double wy = sy - static_cast<double>(y0);
        for (std::int64_t x = 0; x < width; ++x) {
            const double sx = std::clamp((static_cast<double>(x) + 0.5) * scale_x - 0.5, 0.0, static_cast<double>(in.width - 1));
            const auto x0 = static_cast<std::int64_t>(std::floor(sx));
            const std::int64_t x1 = std::min(x0 + 1, in.width - 1);
            const double wx = sx - static_cast<double>(x0);
            for (std::int64_t c = 0; c < in.channels; ++c) {
                const double top = at(y0, x0, c) * (1.0 - wx) + at(y0, x1, c) * wx;
                const double bottom = at(y1, x0, c) * (1.0 - wx) + at(y1, x1, c) * wx;
                const double value = top * (1.0 - wy) + bottom * wy;
                out.pixels[static_cast<std::size_t>((y * width + x) * in.channels + c)] =
                    static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
            }
        }
    }
    return out;
}

Image expand_channels(const Image& image, std::int64_t channels) {
    if (image.shape.channels == channels) {
        return image;
    }
    if (image.shape.channels != 1) {
        throw DataError("can only replicate single-channel images");
    }
    Image out;
    out.shape = {image.shape.height, image.shape.width, channels};
    out.pixels.reserve(static_cast<std::size_t>(out.shape.size()));
    for (const auto value : image.pixels) {
        out.pixels.insert(out.pixels.end(), static_cast<std::size_t>(channels), value);
    }
    return out;
}

Dataset load_image_folder(const std::filesystem::path& root, const std::string& name) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root / "train") || !fs::is_directory(root / "test")) {
        throw DataError("dataset '" + name + "' needs train/ and test/ folders under '" + root.string() + "'");
    }
    Dataset dataset;
    dataset.name = name;
    for (const auto& entry : fs::directory_iterator(root / "train")) {
        if (entry.is_directory()) {
            dataset.class_names.push_back(entry.path().filename().string());
        }
    }
    std::sort(dataset.class_names.begin(), dataset.class_names.end());
    if (dataset.class_names.empty()) {
        throw DataError("dataset '" + name + "' has no class folders");
    }

    bool shape_known = false;
    const auto load_split = [&](const char* split, std::vector<LabeledImage>& into) {
        for (std::size_t cls = 0; cls < dataset.class_names.size(); ++cls) {
            const fs::path dir = root / split / dataset.class_names[cls];
            std::vector<fs::path> files;
            if (fs::is_directory(dir)) {
                for (const auto& entry : fs::directory_iterator(dir)) {
                    if (entry.is_regular_file() && entry.path().extension() == ".img") {
                        files.push_back(entry.path());
                    }
                }
            }
            if (files.empty()) {
                throw DataError("class '" + dataset.class_names[cls] + "' of dataset '" + name + "' has no " + split +
                                " samples");
            }
            std::sort(files.begin(), files.end());
            for (const auto& file : files) {
                Image image = read_netpbm(file);
                if (!shape_known) {
                    dataset.shape = image.shape;
                    shape_known = true;
                } else if (!(image.shape == dataset.shape)) {
                    image = expand_channels(resize_bilinear(image, dataset.shape.height, dataset.shape.width),
                                            dataset.shape.channels);
                }
                into.push_back({std::move(image.pixels), static_cast<std::int64_t>(cls)});
            }
        }
    };
    load_split("train", dataset.train);
    load_split("test", dataset.test);
    return dataset;
}

Dataset make_synthetic_dataset(const std::string& name, const SyntheticConfig& params) {
    Dataset dataset;
    dataset.name = name;
    dataset.shape = {params.height, params.width, params.channels};
    const auto pixels = static_cast<Eigen::Index>(dataset.shape.size());
    const auto latent = static_cast<Eigen::Index>(params.latent_dim);

    Rng rng(derive_seed(fnv1a(name), "synthetic"));
    Matrix mixing(pixels, latent);
    for (Eigen::Index i = 0; i < mixing.size(); ++i) {
        mixing.data()[i] = standard_normal(rng) / std::sqrt(static_cast<double>(latent));
    }
    const double spread = std::sqrt(params.separation * params.separation + params.mode_spread * params.mode_spread +
                                     params.noise * params.noise);
    const double scale = 48.0 / std::max(spread, 1e-12);

    std::vector<std::vector<Vector>> modes(static_cast<std::size_t>(params.classes));
    for (std::int64_t c = 0; c < params.classes; ++c) {
        Vector base(latent);
        for (Eigen::Index k = 0; k < latent; ++k) {
            base[k] = params.separation * standard_normal(rng);
        }
        for (std::int64_t m = 0; m < params.modes_per_class; ++m) {
            Vector center = base;
            for (Eigen::Index k = 0; k < latent; ++k) {
                center[k] += params.mode_spread * standard_normal(rng);
            }
            modes[static_cast<std::size_t>(c)].push_back(std::move(center));
        }
        dataset.class_names.push_back("class_" + std::to_string(c));
    }

    const auto draw = [&](std::int64_t cls, std::int64_t index) {
        const auto& centers = modes[static_cast<std::size_t>(cls)];
        const Vector& center = centers[static_cast<std::size_t>(index % params.modes_per_class)];
        Vector z(latent);
        for (Eigen::Index k = 0; k < latent; ++k) {
            z[k] = center[k] + params.noise * standard_normal(rng);
        }
        const Vector image = mixing * z;
        LabeledImage sample;
        sample.local_class = cls;
        sample.pixels.resize(static_cast<std::size_t>(pixels));
        for (Eigen::Index i = 0; i < pixels; ++i) {
            sample.pixels[static_cast<std::size_t>(i)] =
                static_cast<std::uint8_t>(std::clamp(std::lround(128.0 + scale * image[i]), 0L, 255L));
        }
        return sample;
    };
    for (std::int64_t c = 0; c < params.classes; ++c) {
        for (std::int64_t i = 0; i < params.train_per_class; ++i) {
            dataset.train.push_back(draw(c, i));
        }
        for (std::int64_t i = 0; i < params.test_per_class; ++i) {
            dataset.test.push_back(draw(c, i));
        }
    }
    return dataset;
}

Dataset resolve_dataset(const std::string& identifier, const ExperimentConfig& cfg) {
    constexpr std::string_view prefix = "synth:";
    if (identifier.starts_with(prefix)) {
        return make_synthetic_dataset(identifier, cfg.synthetic);
    }
    return load_image_folder(std::filesystem::path(cfg.data_root) / identifier, identifier);
}

void harmonize_shapes(std::vector<Dataset>& datasets) {
    if (datasets.empty()) {
        return;
    }
    ImageShape target{0, 0, 1};
    for (const auto& dataset : datasets) {
        target.height = std::max(target.height, dataset.shape.height);
        target.width = std::max(target.width, dataset.shape.width);
        target.channels = std::max(target.channels, dataset.shape.channels);
    }
    if (target.channels != 1 && target.channels != 3) {
        throw DataError("cannot harmonize datasets with " + std::to_string(target.channels) + " channels");
    }
    for (auto& dataset : datasets) {
        if (dataset.shape == target) {
            continue;
        }
        const auto convert = [&](std::vector<LabeledImage>& samples) {
            for (auto& sample : samples) {
                Image image{dataset.shape, std::move(sample.pixels)};
                image = expand_channels(resize_bilinear(image, target.height, target.width), target.channels);
                sample.pixels = std::move(image.pixels);
            }
        };
        convert(dataset.train);
        convert(dataset.test);
        dataset.shape = target;
    }
}

}  // namespace clbench
