#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace facecap {

/// Gray value of background pixels in class maps.
inline constexpr std::uint8_t kBackgroundLabel = 255;
/// Gray value of hair pixels in reference class maps; never rendered.
inline constexpr std::uint8_t kHairLabel = 254;

/// Allowed class names.
inline constexpr std::string_view kSemanticVocabulary[] = {
    "skin", "nose", "ears", "eyes", "upper_lip", "lower_lip", "mouth_interior", "background"};

bool is_semantic_class_name(std::string_view name);

/// Per-vertex class labels; label values index `classes`.
struct SemanticAnnotation {
    std::vector<std::string> classes;
    std::vector<std::uint32_t> labels;

    /// Throws ValidationError on unknown names, duplicates or out-of-range labels.
    void validate(std::size_t vertex_count) const;
};

} // namespace facecap
