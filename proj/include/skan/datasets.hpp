#pragma once

// Readers for the IDX (MNIST / Fashion-MNIST) and CIFAR binary layouts.
// Pixels are scaled to [0, 1]; malformed files raise FormatError with the
// byte offset of the problem.

#include <filesystem>
#include <string>

#include "skan/training.hpp"

namespace skan {

/// Reads an IDX image file (magic 0x00000803) and its label file (magic
/// 0x00000801). Images come out as [1 x rows x cols].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Reads one or more CIFAR binary batch files. CIFAR-10 records are 3073
/// bytes (label + 3x32x32); CIFAR-100 records are 3074 bytes (coarse label,
/// fine label, pixels) and the fine label is used.
Dataset load_cifar_binary(const std::vector<std::filesystem::path>& files, bool cifar100);
Dataset load_cifar_binary(const std::filesystem::path& file, bool cifar100 = false);

enum class ImageSet { MNIST, FashionMNIST, CIFAR10, CIFAR100 };

ImageSet parse_image_set(std::string_view name);
std::string_view image_set_key(ImageSet s);

struct ImageSplits {
    Dataset train;
    Dataset test;
};

/// Locates the standard file names under `dir` (MNIST-style
/// train-images-idx3-ubyte, CIFAR-10 data_batch_{1..5}.bin / test_batch.bin,
/// CIFAR-100 train.bin / test.bin), also looking one level down in a
/// directory named after the set. Throws FormatError listing the missing
/// files.
ImageSplits load_image_set(ImageSet set, const std::filesystem::path& dir);

/// True when every file load_image_set needs is present.
bool image_set_available(ImageSet set, const std::filesystem::path& dir);

}  // namespace skan
