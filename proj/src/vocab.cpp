// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dreamedit/vocab.hpp"

#include <algorithm>
#include <sstream>

#include "dreamedit/error.hpp"
#include "dreamedit/image.hpp"

namespace dreamedit {

const std::array<ClassInfo, kClassCount>& classes() {
    static const std::array<ClassInfo, kClassCount> table{{
        {"ball", Shape::Circle, Pattern::Solid, 20.0f},
        {"coin", Shape::Circle, Pattern::Striped, 50.0f},
        {"box", Shape::Square, Pattern::Solid, 100.0f},
        {"crate", Shape::Square, Pattern::Striped, 150.0f},
        {"badge", Shape::Star, Pattern::Solid, 190.0f},
        {"medal", Shape::Star, Pattern::Striped, 230.0f},
        {"kite", Shape::Triangle, Pattern::Solid, 280.0f},
        {"flag", Shape::Triangle, Pattern::Striped, 330.0f},
    }};
    return table;
}

int class_id(std::string_view name) {
    const auto& t = classes();
    for (int i = 0; i < kClassCount; ++i)
        if (t[i].name == name) return i;
    fail(ErrorKind::UnknownToken, "unknown class '" + std::string(name) + "'");
}

std::string_view to_string(Shape shape) {
    switch (shape) {
    case Shape::Circle: return "circle";
    case Shape::Square: return "square";
    case Shape::Star: return "star";
    case Shape::Triangle: return "triangle";
    }
    return "?";
}

std::string_view to_string(Texture texture) {
    switch (texture) {
    case Texture::Plain: return "plain";
    case Texture::Stripes: return "stripes";
    case Texture::Checker: return "checker";
    case Texture::Gradient: return "gradient";
    }
    return "?";
}

Shape shape_from_string(std::string_view name) {
    for (auto s : {Shape::Circle, Shape::Square, Shape::Star, Shape::Triangle})
        if (to_string(s) == name) return s;
    fail(ErrorKind::InvalidParameter, "unknown shape '" + std::string(name) + "'");
}

const std::array<ColorWord, 8>& color_words() {
    static const std::array<ColorWord, 8> table{{
        {"red", 0.0f},
        {"orange", 30.0f},
        {"yellow", 60.0f},
        {"green", 120.0f},
        {"cyan", 180.0f},
        {"blue", 230.0f},
        {"purple", 280.0f},
        {"pink", 325.0f},
    }};
    return table;
}

std::string_view color_word_for(float hue) {
    const auto& t = color_words();
    const auto best = std::min_element(t.begin(), t.end(), [&](const ColorWord& a, const ColorWord& b) {
        return hue_distance(a.hue, hue) < hue_distance(b.hue, hue);
    });
    return best->name;
}

Vocabulary::Vocabulary() {
    words_ = {std::string(token::kNullText), "a", "photo", "of", "in", "background"};
    for (const auto& c : classes()) words_.emplace_back(c.name);
    for (const auto& c : color_words()) words_.emplace_back(c.name);
    for (auto s : {Shape::Circle, Shape::Square, Shape::Star, Shape::Triangle}) words_.emplace_back(to_string(s));
    for (auto t : {Texture::Plain, Texture::Stripes, Texture::Checker, Texture::Gradient}) words_.emplace_back(to_string(t));
    words_.emplace_back(token::kSubjectText);
    words_.emplace_back(token::kBackgroundText);
}

const Vocabulary& Vocabulary::instance() {
    static const Vocabulary vocab;
    return vocab;
}

int Vocabulary::id(std::string_view word) const {
    const auto it = std::find(words_.begin(), words_.end(), word);
    require(it != words_.end(), ErrorKind::UnknownToken, "'" + std::string(word) + "'");
    return static_cast<int>(it - words_.begin());
}

const std::string& Vocabulary::word(int id) const {
    require(id >= 0 && id < size(), ErrorKind::UnknownToken, "id " + std::to_string(id));
    return words_[id];
}

PromptTokens PromptTokens::parse(std::string_view text) {
    PromptTokens p;
    std::istringstream in{std::string(text)};
    std::string w;
    const auto& vocab = Vocabulary::instance();
    while (in >> w) p.ids.push_back(vocab.id(w));
    p.validate();
    return p;
}

std::string PromptTokens::text() const {
    std::string out;
    for (int id : ids) {
        if (!out.empty()) out += ' ';
        out += Vocabulary::instance().word(id);
    }
    return out;
}

int PromptTokens::count(int id) const { return static_cast<int>(std::count(ids.begin(), ids.end(), id)); }

void PromptTokens::validate() const {
    require(!ids.empty() && ids.size() <= kMaxPromptTokens, ErrorKind::InvalidParameter,
            "prompt must have 1.." + std::to_string(kMaxPromptTokens) + " tokens");
    const int v = Vocabulary::instance().size();
    for (int id : ids) require(id >= 0 && id < v, ErrorKind::UnknownToken, "id " + std::to_string(id));
}

} // namespace dreamedit
