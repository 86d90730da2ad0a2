#include "facecap/semantic.hpp"

#include "facecap/errors.hpp"

#include <algorithm>

namespace facecap {

bool is_semantic_class_name(std::string_view name) {
    return std::find(std::begin(kSemanticVocabulary), std::end(kSemanticVocabulary), name) !=
           std::end(kSemanticVocabulary);
}

void SemanticAnnotation::validate(std::size_t vertex_count) const {
    if (classes.empty()) throw ValidationError("semantic annotation has no classes");
    if (classes.size() > kHairLabel) throw ValidationError("too many semantic classes");
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (!is_semantic_class_name(classes[i])) throw ValidationError("unknown semantic class '" + classes[i] + "'");
        for (std::size_t j = 0; j < i; ++j)
            if (classes[j] == classes[i]) throw ValidationError("duplicate semantic class '" + classes[i] + "'");
    }
    if (labels.size() != vertex_count)
        throw ValidationError("semantic annotation has " + std::to_string(labels.size()) + " labels for " +
                              std::to_string(vertex_count) + " vertices");
    for (std::size_t v = 0; v < labels.size(); ++v)
        if (labels[v] >= classes.size())
            throw ValidationError("vertex " + std::to_string(v) + " has label " + std::to_string(labels[v]) +
                                  " >= class count " + std::to_string(classes.size()));
}

} // namespace facecap
