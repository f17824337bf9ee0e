#pragma once

#include "fsma/common/rng.hpp"
#include "fsma/taskdata/sample.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fsma::taskdata {

/// Procedurally drawn portrait with pixel-exact annotations, for tests and
/// desk-scale experiments where no licensed face data is available.
///
/// Landmarks follow the 68-point iBUG layout (jaw 0-16, brows 17-26, nose
/// 27-35, eyes 36-47, mouth 48-67; 36 and 45 are the outer eye corners).
/// Labels follow the 11-class Helen layout listed by face_class_names().
struct SyntheticFace {
    torch::Tensor image;   // 3 x S x S in [0, 1]
    PointSet landmarks;    // 68 points, pixel coordinates
    torch::Tensor labels;  // S x S int64
};

inline constexpr std::int64_t kFaceLandmarks = 68;
inline constexpr std::int64_t kFaceClasses = 11;

/// background, skin, l_brow, r_brow, l_eye, r_eye, nose, u_lip, in_mouth, l_lip, hair
const std::vector<std::string>& face_class_names();

/// Index of the mirrored counterpart of each landmark / class under a horizontal flip.
const std::vector<std::int64_t>& face_landmark_mirror();
const std::vector<std::int64_t>& face_class_mirror();

SyntheticFace generate_face(std::int64_t size, Rng& rng);

/// Face i is drawn from Rng(derive_seed(seed, i)), so any prefix of a larger
/// set equals the smaller set.
std::vector<SyntheticFace> generate_faces(std::int64_t count, std::int64_t size, std::uint64_t seed);

SampleSet as_plain_samples(const std::vector<SyntheticFace>& faces, const std::string& prefix = "face");
SampleSet as_landmark_samples(const std::vector<SyntheticFace>& faces, const std::string& prefix = "face");
SampleSet as_segmentation_samples(const std::vector<SyntheticFace>& faces, const std::string& prefix = "face");

/// Writes images/, points/, masks/ and the manifests landmarks.txt,
/// segmentation.txt and clean.txt under `dir`.
void write_face_dataset(const std::filesystem::path& dir, const std::vector<SyntheticFace>& faces,
                        const std::string& prefix = "face");

} // namespace fsma::taskdata
