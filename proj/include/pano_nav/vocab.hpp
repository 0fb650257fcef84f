#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pano_nav/core/error.hpp"

namespace pano_nav {

enum class ClassCategory { FixedReceptacle, MovableReceptacle, Pickable };

struct ObjectClass {
    int id = 0;
    std::string name;

    friend bool operator==(const ObjectClass&, const ObjectClass&) = default;
};

namespace detail {

// Interleaved so that any prefix of length >= 3 contains every category.
inline constexpr std::array<std::pair<std::string_view, ClassCategory>, 32> kClassCatalog{{
    {"counter", ClassCategory::FixedReceptacle},   {"bowl", ClassCategory::MovableReceptacle},
    {"knife", ClassCategory::Pickable},            {"table", ClassCategory::FixedReceptacle},
    {"plate", ClassCategory::MovableReceptacle},   {"apple", ClassCategory::Pickable},
    {"shelf", ClassCategory::FixedReceptacle},     {"pan", ClassCategory::MovableReceptacle},
    {"tomato", ClassCategory::Pickable},           {"desk", ClassCategory::FixedReceptacle},
    {"pot", ClassCategory::MovableReceptacle},     {"spoon", ClassCategory::Pickable},
    {"cabinet", ClassCategory::FixedReceptacle},   {"mug", ClassCategory::MovableReceptacle},
    {"fork", ClassCategory::Pickable},             {"sink", ClassCategory::FixedReceptacle},
    {"box", ClassCategory::MovableReceptacle},     {"bread", ClassCategory::Pickable},
    {"stove", ClassCategory::FixedReceptacle},     {"tray", ClassCategory::MovableReceptacle},
    {"potato", ClassCategory::Pickable},           {"dresser", ClassCategory::FixedReceptacle},
    {"basket", ClassCategory::MovableReceptacle},  {"egg", ClassCategory::Pickable},
    {"lettuce", ClassCategory::Pickable},          {"key", ClassCategory::Pickable},
    {"pen", ClassCategory::Pickable},              {"book", ClassCategory::Pickable},
    {"phone", ClassCategory::Pickable},            {"remote", ClassCategory::Pickable},
    {"sponge", ClassCategory::Pickable},           {"candle", ClassCategory::Pickable},
}};

inline constexpr std::array<std::string_view, 10> kTemplateWords{
    "walk", "to", "the", "on", "left", "right", "pick", "up", "put", "in"};

} // namespace detail

inline constexpr int kDefaultClassCount = 32;

/// Dense class vocabulary 0..C-1. Classes past the built-in catalog are
/// generic pickables named "item<id>".
class ClassVocabulary {
public:
    explicit ClassVocabulary(int classCount = kDefaultClassCount) {
        if (classCount < 3) throw Error(ErrorKind::ConfigError, "class vocabulary needs at least 3 classes");
        for (int id = 0; id < classCount; ++id) {
            if (id < static_cast<int>(detail::kClassCatalog.size())) {
                names_.emplace_back(detail::kClassCatalog[static_cast<std::size_t>(id)].first);
                categories_.push_back(detail::kClassCatalog[static_cast<std::size_t>(id)].second);
            } else {
                names_.push_back("item" + std::to_string(id));
                categories_.push_back(ClassCategory::Pickable);
            }
        }
    }

    int size() const { return static_cast<int>(names_.size()); }
    ObjectClass at(int id) const { return {id, names_.at(static_cast<std::size_t>(id))}; }
    ClassCategory category(int id) const { return categories_.at(static_cast<std::size_t>(id)); }

    std::optional<ObjectClass> find(std::string_view name) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return ObjectClass{static_cast<int>(i), names_[i]};
        return std::nullopt;
    }

    std::vector<int> ids_in(ClassCategory category) const {
        std::vector<int> out;
        for (int id = 0; id < size(); ++id)
            if (categories_[static_cast<std::size_t>(id)] == category) out.push_back(id);
        return out;
    }

private:
    std::vector<std::string> names_;
    std::vector<ClassCategory> categories_;
};

struct Instruction {
    std::vector<int> tokens;
    std::string surface;

    friend bool operator==(const Instruction&, const Instruction&) = default;
};

/// Word vocabulary: the fixed template words followed by the class names.
class WordVocabulary {
public:
    explicit WordVocabulary(const ClassVocabulary& classes) {
        for (auto w : detail::kTemplateWords) words_.emplace_back(w);
        for (int id = 0; id < classes.size(); ++id) words_.push_back(classes.at(id).name);
    }

    explicit WordVocabulary(int classCount = kDefaultClassCount) : WordVocabulary(ClassVocabulary(classCount)) {}

    int size() const { return static_cast<int>(words_.size()); }
    const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }

    int id_of(std::string_view w) const {
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] == w) return static_cast<int>(i);
        throw Error(ErrorKind::ValidationError, "word not in vocabulary: " + std::string(w));
    }

    /// Class id named by a token, if the token is a class name.
    std::optional<int> class_of_token(int token) const {
        const int first = static_cast<int>(detail::kTemplateWords.size());
        if (token >= first && token < size()) return token - first;
        return std::nullopt;
    }

    std::vector<int> tokenize(std::string_view surface) const {
        std::vector<int> ids;
        std::istringstream in{std::string(surface)};
        std::string w;
        while (in >> w) ids.push_back(id_of(w));
        return ids;
    }

    std::string render(const std::vector<int>& tokens) const {
        std::string out;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i) out += ' ';
            out += word(tokens[i]);
        }
        return out;
    }

    Instruction make(std::string_view surface) const { return {tokenize(surface), std::string(surface)}; }

private:
    std::vector<std::string> words_;
};

} // namespace pano_nav
