// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace dreamedit {

enum class Shape { Circle, Square, Star, Triangle };
enum class Pattern { Solid, Striped };
enum class Texture { Plain, Stripes, Checker, Gradient };

inline constexpr int kClassCount = 8;
inline constexpr int kMaxPromptTokens = 8;

struct ClassInfo {
    std::string_view name;
    Shape shape;
    Pattern pattern;
    float typical_hue;  // degrees; colour of the class prototype
};

/// The benchmark vocabulary of subject classes.
const std::array<ClassInfo, kClassCount>& classes();
int class_id(std::string_view name);

std::string_view to_string(Shape shape);
std::string_view to_string(Texture texture);
Shape shape_from_string(std::string_view name);

/// Named hue buckets used in prompts.
struct ColorWord {
    std::string_view name;
    float hue;
};
const std::array<ColorWord, 8>& color_words();
/// Nearest colour word for a hue in degrees.
std::string_view color_word_for(float hue);

namespace token {
inline constexpr int kNull = 0;
inline constexpr std::string_view kNullText = "<null>";
inline constexpr std::string_view kSubjectText = "<v>";
inline constexpr std::string_view kBackgroundText = "<y>";
} // namespace token

/// Fixed word vocabulary shared by every model.
class Vocabulary {
public:
    static const Vocabulary& instance();

    int size() const { return static_cast<int>(words_.size()); }
    /// Throws UnknownToken.
    int id(std::string_view word) const;
    const std::string& word(int id) const;

    int subject_token() const { return id(token::kSubjectText); }
    int background_token() const { return id(token::kBackgroundText); }

private:
    Vocabulary();
    std::vector<std::string> words_;
};

/// A prompt as a sequence of vocabulary ids.
struct PromptTokens {
    std::vector<int> ids;

    /// Whitespace-separated words; throws UnknownToken.
    static PromptTokens parse(std::string_view text);
    static PromptTokens null() { return PromptTokens{{token::kNull}}; }

    std::string text() const;
    int count(int id) const;
    bool contains(int id) const { return count(id) > 0; }
    /// Throws UnknownToken / InvalidParameter on out-of-vocabulary ids or length.
    void validate() const;

    bool operator==(const PromptTokens&) const = default;
};

} // namespace dreamedit
