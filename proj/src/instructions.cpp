#include "collagen/instructions.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "collagen/error.hpp"

namespace collagen {

std::string_view to_string(Verbosity v) { return v == Verbosity::brief ? "brief" : "detailed"; }

Verbosity verbosity_from_string(std::string_view text) {
    if (text == "brief") return Verbosity::brief;
    if (text == "detailed") return Verbosity::detailed;
    throw Error("unknown verbosity '" + std::string(text) + "'");
}

namespace {

using namespace std::string_view_literals;

// clang-format off
constexpr std::array kRemove{
    "remove the {subject}"sv, "delete the {subject} from the image"sv, "take out the {subject}"sv,
    "get rid of the {subject}"sv, "erase the {subject}"sv, "make the {subject} disappear"sv,
    "remove the {subject} from the scene"sv, "please remove the {subject}"sv,
    "the {subject} should be gone"sv};
constexpr std::array kAdd{
    "add {subject_a} {subject}"sv, "put {subject_a} {subject} in the image"sv,
    "place {subject_a} {subject} in the scene"sv, "insert {subject_a} {subject}"sv,
    "include {subject_a} {subject}"sv, "add {subject_a} {subject} to the picture"sv,
    "there should be {subject_a} {subject}"sv, "please add {subject_a} {subject}"sv};
constexpr std::array kReplace{
    "replace the {subject} with {new_subject_a} {new_subject}"sv,
    "swap the {subject} for {new_subject_a} {new_subject}"sv,
    "change the {subject} into {new_subject_a} {new_subject}"sv,
    "turn the {subject} into {new_subject_a} {new_subject}"sv,
    "substitute {new_subject_a} {new_subject} for the {subject}"sv,
    "put {new_subject_a} {new_subject} where the {subject} is"sv,
    "exchange the {subject} with {new_subject_a} {new_subject}"sv,
    "make the {subject} {new_subject_a} {new_subject} instead"sv};
constexpr std::array kQuantity{
    "change the number of {subject} to {count}"sv, "make it {count} {subject} in total"sv,
    "there should be {count} of the {subject}"sv, "adjust the count of {subject} to {count}"sv,
    "show exactly {count} {subject}"sv, "set the number of {subject} to {count}"sv,
    "keep {count} copies of the {subject}"sv, "let the image contain {count} {subject}"sv};
constexpr std::array kColor{
    "change the {color_a} {shape} to {color_b}"sv, "make the {color_a} {shape} {color_b}"sv,
    "recolor the {color_a} {shape} {color_b}"sv, "paint the {color_a} {shape} {color_b}"sv,
    "turn the {color_a} {shape} {color_b}"sv, "the {color_a} {shape} should be {color_b}"sv,
    "switch the {color_a} {shape} to {color_b}"sv, "color the {color_a} {shape} {color_b} instead"sv};
constexpr std::array kSize{
    "make the {subject} {direction}"sv, "resize the {subject} to be {direction}"sv,
    "the {subject} should look {direction}"sv, "scale the {subject} so it is {direction}"sv,
    "render the {subject} {direction}"sv, "change the {subject} to be a bit {direction}"sv,
    "let the {subject} appear {direction}"sv, "adjust the {subject} to look {direction}"sv};
constexpr std::array kPosition{
    "move the {subject} {direction}"sv, "shift the {subject} {direction}"sv,
    "slide the {subject} {direction}"sv, "nudge the {subject} {direction}"sv,
    "push the {subject} {direction} a little"sv, "move the {subject} a bit {direction}"sv,
    "drag the {subject} {direction}"sv, "reposition the {subject} further {direction}"sv};
constexpr std::array kSegMask{
    "segment the {subject} in {color}"sv, "highlight the {subject} with a {color} mask"sv,
    "fill the {subject} with {color}"sv, "mask the {subject} in {color}"sv,
    "paint a {color} mask over the {subject}"sv, "mark the {subject} in {color}"sv,
    "cover the {subject} with {color}"sv, "show the segmentation of the {subject} in {color}"sv};
constexpr std::array kSegBox{
    "detect the {subject} with a {color} box"sv, "draw a {color} bounding box around the {subject}"sv,
    "put a {color} box around the {subject}"sv, "outline the {subject} with a {color} rectangle"sv,
    "mark the {subject} with a {color} box"sv, "locate the {subject} using a {color} box"sv,
    "frame the {subject} in {color}"sv, "box the {subject} in {color}"sv};
constexpr std::array kBackground{
    "change the background to {bg_subject_a} {bg_subject}"sv,
    "replace the background with {bg_subject_a} {bg_subject}"sv,
    "put the scene in front of {bg_subject_a} {bg_subject}"sv,
    "swap the background for {bg_subject_a} {bg_subject}"sv,
    "set the background to {bg_subject_a} {bg_subject}"sv, "use {bg_subject_a} {bg_subject} as the background"sv,
    "move everything onto {bg_subject_a} {bg_subject}"sv, "make the backdrop {bg_subject_a} {bg_subject}"sv};
constexpr std::array kTextRemove{
    "remove the text \"{text}\""sv, "delete the word \"{text}\""sv, "erase the text \"{text}\""sv,
    "take out the text \"{text}\""sv, "get rid of the writing \"{text}\""sv,
    "remove the caption \"{text}\""sv, "clear the text \"{text}\" from the image"sv,
    "the text \"{text}\" should be gone"sv};
constexpr std::array kTextAdd{
    "add the text \"{text}\""sv, "write \"{text}\" on the image"sv, "put the word \"{text}\" in the image"sv,
    "insert the text \"{text}\""sv, "place the text \"{text}\" in the scene"sv,
    "label the image with \"{text}\""sv, "add a caption reading \"{text}\""sv,
    "type \"{text}\" onto the picture"sv};
constexpr std::array kTextReplace{
    "replace the text \"{text}\" with \"{new_text}\""sv, "change \"{text}\" to \"{new_text}\""sv,
    "rewrite \"{text}\" as \"{new_text}\""sv, "swap the text \"{text}\" for \"{new_text}\""sv,
    "edit the text \"{text}\" to read \"{new_text}\""sv, "turn \"{text}\" into \"{new_text}\""sv,
    "make the text \"{text}\" say \"{new_text}\""sv, "substitute \"{new_text}\" for \"{text}\""sv};
constexpr std::array kVideoRemove{
    "remove the {subject} from the video"sv, "delete the {subject} in every frame"sv,
    "take the {subject} out of the clip"sv, "erase the {subject} from the video"sv,
    "make the {subject} disappear from the clip"sv, "get rid of the {subject} in the video"sv,
    "remove the {subject}"sv, "cut the {subject} out of the footage"sv};
constexpr std::array kVideoAdd{
    "add {subject_a} {subject} to the video"sv, "put {subject_a} {subject} into the clip"sv,
    "insert {subject_a} {subject} in every frame"sv, "place {subject_a} {subject} in the video"sv,
    "add {subject_a} {subject}"sv, "include {subject_a} {subject} in the footage"sv,
    "make {subject_a} {subject} appear in the clip"sv, "bring {subject_a} {subject} into the video"sv};
constexpr std::array kVideoReplace{
    "replace the {subject} with {new_subject_a} {new_subject} in the video"sv,
    "swap the {subject} for {new_subject_a} {new_subject} throughout the clip"sv,
    "turn the {subject} into {new_subject_a} {new_subject}"sv,
    "change the {subject} to {new_subject_a} {new_subject} in every frame"sv,
    "substitute {new_subject_a} {new_subject} for the {subject} in the video"sv,
    "put {new_subject_a} {new_subject} where the {subject} is in the clip"sv,
    "exchange the {subject} with {new_subject_a} {new_subject} in the footage"sv,
    "make the {subject} {new_subject_a} {new_subject} in the video"sv};
// clang-format on

struct BankEntry {
    std::string_view name;
    std::span<const std::string_view> patterns;
};

const std::array kBanks{
    BankEntry{"remove", kRemove},          BankEntry{"add", kAdd},
    BankEntry{"replace", kReplace},        BankEntry{"quantity", kQuantity},
    BankEntry{"color", kColor},            BankEntry{"size", kSize},
    BankEntry{"position", kPosition},      BankEntry{"seg_mask", kSegMask},
    BankEntry{"seg_bbox", kSegBox},        BankEntry{"background", kBackground},
    BankEntry{"text_remove", kTextRemove}, BankEntry{"text_add", kTextAdd},
    BankEntry{"text_replace", kTextReplace}, BankEntry{"video_remove", kVideoRemove},
    BankEntry{"video_add", kVideoAdd},     BankEntry{"video_replace", kVideoReplace},
};

std::string lower_first(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
    return s;
}

bool contains_ci(std::string_view hay, std::string_view needle) {
    auto it = std::search(hay.begin(), hay.end(), needle.begin(), needle.end(), [](char a, char b) {
        return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
    });
    return it != hay.end();
}

std::string article_for(std::string_view phrase) {
    if (phrase.empty()) return "a";
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(phrase.front())));
    return std::string_view("aeiou").find(c) != std::string_view::npos ? "an" : "a";
}

}  // namespace

std::vector<std::string> placeholders(std::string_view pattern) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = pattern.find('{', pos)) != std::string_view::npos) {
        const auto end = pattern.find('}', pos);
        if (end == std::string_view::npos) throw Error("unterminated placeholder in template");
        out.emplace_back(pattern.substr(pos + 1, end - pos - 1));
        pos = end + 1;
    }
    return out;
}

std::string render_template(std::string_view pattern, const Bindings& bindings) {
    std::string out;
    std::size_t pos = 0;
    while (pos < pattern.size()) {
        const auto open = pattern.find('{', pos);
        if (open == std::string_view::npos) {
            out.append(pattern.substr(pos));
            break;
        }
        out.append(pattern.substr(pos, open - pos));
        const auto close = pattern.find('}', open);
        if (close == std::string_view::npos) throw Error("unterminated placeholder in template");
        const auto name = pattern.substr(open + 1, close - open - 1);
        const auto it = bindings.find(name);
        if (it == bindings.end()) throw Error("unbound placeholder {" + std::string(name) + "}");
        out.append(it->second);
        pos = close + 1;
    }
    return out;
}

std::span<const std::string_view> template_bank(std::string_view bank) {
    for (const auto& entry : kBanks) {
        if (entry.name == bank) return entry.patterns;
    }
    throw Error("unknown instruction bank '" + std::string(bank) + "'");
}

std::vector<std::string_view> template_bank_names() {
    std::vector<std::string_view> out;
    for (const auto& entry : kBanks) out.push_back(entry.name);
    return out;
}

std::string caption_subject(std::string_view caption) {
    std::string s(caption);
    while (!s.empty() && (s.back() == '.' || s.back() == ' ' || s.back() == '!')) s.pop_back();
    for (std::string_view article : {"a ", "an ", "the "}) {
        if (s.size() > article.size() && contains_ci(s.substr(0, article.size()), article)) {
            s.erase(0, article.size());
            break;
        }
    }
    return lower_first(std::move(s));
}

std::string caption_phrase(const CaptionPair& captions, Verbosity verbosity) {
    const auto brief = caption_subject(captions.brief);
    if (verbosity == Verbosity::detailed && !captions.detailed.empty()) {
        auto detailed = caption_subject(captions.detailed);
        if (contains_ci(detailed, brief)) return detailed;
    }
    return brief;
}

std::string render_instruction(const InstructionSpec& spec) {
    const auto bank = template_bank(spec.bank);
    if (spec.template_index < 0 || static_cast<std::size_t>(spec.template_index) >= bank.size()) {
        throw Error("template index out of range");
    }
    return render_template(bank[static_cast<std::size_t>(spec.template_index)], spec.bindings);
}

InstructionSpec build_instruction(std::string_view bank, Bindings plain,
                                  const std::map<std::string, CaptionPair, std::less<>>& captioned, Rng& rng) {
    const auto patterns = template_bank(bank);
    InstructionSpec spec;
    spec.bank = std::string(bank);
    spec.template_index = static_cast<int>(rng.below(patterns.size()));
    spec.verbosity = rng.coin() ? Verbosity::detailed : Verbosity::brief;
    spec.bindings = std::move(plain);
    for (const auto& [name, captions] : captioned) {
        auto phrase = caption_phrase(captions, spec.verbosity);
        spec.bindings[name + "_a"] = article_for(phrase);
        spec.bindings[name] = std::move(phrase);
    }
    render_instruction(spec);
    return spec;
}

}  // namespace collagen
