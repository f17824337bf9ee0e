#pragma once

#include "fsma/model/bundle.hpp"
#include "fsma/model/checkpoint.hpp"

#include <torch/torch.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace fsma::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("fsma_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Small backbone for fast tests: 32 px input, base width 8.
inline model::BackboneConfig tiny_backbone() {
    model::BackboneConfig cfg;
    cfg.input_size = 32;
    cfg.base_channels = 8;
    return cfg;
}

/// An untrained auto-encoder packaged as a pretraining checkpoint.
inline model::Checkpoint untrained_checkpoint(const model::BackboneConfig& cfg = tiny_backbone(), std::uint64_t seed = 5) {
    auto bundle = model::build_autoencoder(cfg, seed);
    bundle.set_training(false);
    return model::make_checkpoint(bundle, "pretrain", 0);
}

inline bool bit_equal(const torch::Tensor& a, const torch::Tensor& b) {
    return a.sizes() == b.sizes() && a.dtype() == b.dtype() && torch::equal(a, b);
}

} // namespace fsma::test
