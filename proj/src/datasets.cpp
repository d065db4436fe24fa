#include "skan/datasets.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <optional>

namespace skan {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const std::filesystem::path& path) {
    if (off + 4 > b.size()) {
        throw FormatError(path.string() + ": truncated header at offset " + std::to_string(off) + " (file is " +
                          std::to_string(b.size()) + " bytes)");
    }
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

void expect_length(const std::vector<unsigned char>& b, std::size_t expected, const std::filesystem::path& path) {
    if (b.size() != expected) {
        throw FormatError(path.string() + ": expected " + std::to_string(expected) + " bytes from the header, found " +
                          std::to_string(b.size()) + " (mismatch at offset " +
                          std::to_string(std::min(expected, b.size())) + ")");
    }
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto img = read_file(images);
    const auto lab = read_file(labels);

    const auto img_magic = be32(img, 0, images);
    if (img_magic != 0x00000803u) {
        throw FormatError(images.string() + ": bad IDX image magic at offset 0 (got " + std::to_string(img_magic) + ")");
    }
    const std::size_t n = be32(img, 4, images), rows = be32(img, 8, images), cols = be32(img, 12, images);
    expect_length(img, 16 + n * rows * cols, images);

    const auto lab_magic = be32(lab, 0, labels);
    if (lab_magic != 0x00000801u) {
        throw FormatError(labels.string() + ": bad IDX label magic at offset 0 (got " + std::to_string(lab_magic) + ")");
    }
    const std::size_t nl = be32(lab, 4, labels);
    if (nl != n) {
        throw FormatError(labels.string() + ": label count " + std::to_string(nl) + " at offset 4 does not match " +
                          std::to_string(n) + " images");
    }
    expect_length(lab, 8 + n, labels);

    Dataset d;
    d.item_shape = {1, rows, cols};
    d.inputs.resize(n * rows * cols);
    for (std::size_t i = 0; i < d.inputs.size(); ++i) d.inputs[i] = img[16 + i] / 255.0;
    d.labels.resize(n);
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        d.labels[i] = lab[8 + i];
        max_label = std::max(max_label, d.labels[i]);
    }
    d.num_classes = static_cast<std::size_t>(std::max(10, max_label + 1));
    return d;
}

Dataset load_cifar_binary(const std::vector<std::filesystem::path>& files, bool cifar100) {
    constexpr std::size_t kPixels = 3 * 32 * 32;
    const std::size_t header = cifar100 ? 2 : 1;
    const std::size_t record = header + kPixels;
    Dataset d;
    d.item_shape = {3, 32, 32};
    d.num_classes = cifar100 ? 100 : 10;
    for (const auto& path : files) {
        const auto b = read_file(path);
        if (b.empty() || b.size() % record != 0) {
            const std::size_t whole = b.size() / record;
            throw FormatError(path.string() + ": " + std::to_string(b.size()) + " bytes is not a whole number of " +
                              std::to_string(record) + "-byte records; expected " +
                              std::to_string((whole + 1) * record) + " bytes, last record starts at offset " +
                              std::to_string(whole * record));
        }
        const std::size_t n = b.size() / record;
        for (std::size_t r = 0; r < n; ++r) {
            const std::size_t off = r * record;
            const int label = b[off + header - 1];
            if (label >= static_cast<int>(d.num_classes)) {
                throw FormatError(path.string() + ": label " + std::to_string(label) + " at offset " +
                                  std::to_string(off + header - 1) + " out of range");
            }
            d.labels.push_back(label);
            for (std::size_t k = 0; k < kPixels; ++k) d.inputs.push_back(b[off + header + k] / 255.0);
        }
    }
    return d;
}

Dataset load_cifar_binary(const std::filesystem::path& file, bool cifar100) {
    return load_cifar_binary(std::vector<std::filesystem::path>{file}, cifar100);
}

ImageSet parse_image_set(std::string_view name) {
    std::string n;
    for (char c : name)
        if (std::isalnum(static_cast<unsigned char>(c))) n += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (n == "mnist") return ImageSet::MNIST;
    if (n == "fashionmnist" || n == "fashion") return ImageSet::FashionMNIST;
    if (n == "cifar10") return ImageSet::CIFAR10;
    if (n == "cifar100") return ImageSet::CIFAR100;
    throw ContractError("unknown dataset '" + std::string(name) + "'");
}

std::string_view image_set_key(ImageSet s) {
    switch (s) {
        case ImageSet::MNIST: return "mnist";
        case ImageSet::FashionMNIST: return "fashion_mnist";
        case ImageSet::CIFAR10: return "cifar10";
        case ImageSet::CIFAR100: return "cifar100";
    }
    return "?";
}

namespace {

struct FileSet {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

FileSet required_files(ImageSet set) {
    switch (set) {
        case ImageSet::MNIST:
        case ImageSet::FashionMNIST:
            return {{"train-images-idx3-ubyte", "train-labels-idx1-ubyte"},
                    {"t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"}};
        case ImageSet::CIFAR10:
            return {{"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin", "data_batch_5.bin"},
                    {"test_batch.bin"}};
        case ImageSet::CIFAR100: return {{"train.bin"}, {"test.bin"}};
    }
    return {};
}

std::vector<std::filesystem::path> candidate_dirs(ImageSet set, const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out{dir, dir / std::string(image_set_key(set))};
    switch (set) {
        case ImageSet::MNIST: out.push_back(dir / "MNIST" / "raw"); break;
        case ImageSet::FashionMNIST:
            out.push_back(dir / "FashionMNIST" / "raw");
            out.push_back(dir / "fashion");
            break;
        case ImageSet::CIFAR10: out.push_back(dir / "cifar-10-batches-bin"); break;
        case ImageSet::CIFAR100: out.push_back(dir / "cifar-100-binary"); break;
    }
    return out;
}

std::optional<std::filesystem::path> resolve(ImageSet set, const std::filesystem::path& dir) {
    const auto files = required_files(set);
    for (const auto& d : candidate_dirs(set, dir)) {
        bool ok = true;
        for (const auto* group : {&files.train, &files.test})
            for (const auto& f : *group) ok = ok && std::filesystem::is_regular_file(d / f);
        if (ok) return d;
    }
    return std::nullopt;
}

}  // namespace

bool image_set_available(ImageSet set, const std::filesystem::path& dir) { return resolve(set, dir).has_value(); }

ImageSplits load_image_set(ImageSet set, const std::filesystem::path& dir) {
    const auto found = resolve(set, dir);
    const auto files = required_files(set);
    if (!found) {
        std::string names;
        for (const auto* group : {&files.train, &files.test})
            for (const auto& f : *group) names += (names.empty() ? "" : ", ") + f;
        throw FormatError(std::string(image_set_key(set)) + " files not found under " + dir.string() + " (need " +
                          names + ")");
    }
    const auto& d = *found;
    ImageSplits s;
    if (set == ImageSet::MNIST || set == ImageSet::FashionMNIST) {
        s.train = load_idx(d / files.train[0], d / files.train[1]);
        s.test = load_idx(d / files.test[0], d / files.test[1]);
    } else {
        const bool c100 = set == ImageSet::CIFAR100;
        std::vector<std::filesystem::path> train, test;
        for (const auto& f : files.train) train.push_back(d / f);
        for (const auto& f : files.test) test.push_back(d / f);
        s.train = load_cifar_binary(train, c100);
        s.test = load_cifar_binary(test, c100);
    }
    return s;
}

}  // namespace skan
