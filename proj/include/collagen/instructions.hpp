#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "collagen/rng.hpp"

namespace collagen {

enum class Verbosity { brief, detailed };

std::string_view to_string(Verbosity v);
Verbosity verbosity_from_string(std::string_view text);

using Bindings = std::map<std::string, std::string, std::less<>>;

/// A paraphrase with {name} placeholders, e.g. "remove the {subject}".
struct InstructionTemplate {
    std::string pattern;
    std::string bank;  ///< edit-type bank the pattern belongs to
    Verbosity verbosity = Verbosity::brief;
};

/// Placeholder names in order of appearance.
std::vector<std::string> placeholders(std::string_view pattern);

/// Substitutes every placeholder; throws Error on an unbound name.
std::string render_template(std::string_view pattern, const Bindings& bindings);
inline std::string render_template(const InstructionTemplate& t, const Bindings& bindings) {
    return render_template(t.pattern, bindings);
}

/// Paraphrase bank for an edit type (at least eight entries each).
std::span<const std::string_view> template_bank(std::string_view bank);
std::vector<std::string_view> template_bank_names();

struct CaptionPair {
    std::string brief;
    std::string detailed;
};

/// "A fox." -> "fox": drops a leading article and trailing punctuation and
/// lower-cases the first letter.
std::string caption_subject(std::string_view caption);

/// Phrase bound to a caption placeholder. The detailed caption is used only
/// when it mentions the brief subject, so the instruction always names it.
std::string caption_phrase(const CaptionPair& captions, Verbosity verbosity);

/// Everything needed to re-render an instruction.
struct InstructionSpec {
    std::string bank;
    int template_index = 0;
    Verbosity verbosity = Verbosity::brief;
    Bindings bindings;  ///< fully resolved

    friend bool operator==(const InstructionSpec&, const InstructionSpec&) = default;
};

std::string render_instruction(const InstructionSpec& spec);

/// Draws a paraphrase uniformly from the bank and a verbosity, then resolves
/// `captioned` placeholders to brief or detailed phrases.
InstructionSpec build_instruction(std::string_view bank, Bindings plain,
                                  const std::map<std::string, CaptionPair, std::less<>>& captioned, Rng& rng);

}  // namespace collagen
