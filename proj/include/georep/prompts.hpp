#pragma once

#include <string>
#include <string_view>

#include "georep/core.hpp"
#include "georep/dataset.hpp"

namespace georep {

// Solve template. The "{problem}" slot is the only substitution point; any
// other braces in the problem body pass through untouched.
inline constexpr std::string_view kSolveTemplate = R"TPL(You are solving a geometry problem.
You MUST follow ALL rules exactly.

---------- RULES ----------
1. Output MUST be valid JSON only.
2. Do NOT include markdown formatting,
   code blocks, or extra text.
3. The JSON must contain EXACTLY two keys:
   - "reasoning"
   - "numeric_answer"
4. "reasoning":
   - Must clearly explain the math steps.
   - May use words, symbols, equations.
   - MUST NOT contain literal line breaks.
     Use the escaped string "\\n".
5. "numeric_answer":
   - MUST be a string.
   - MUST contain ONLY the final numeric
     answer. No words or units.
6. Allowed formats for "numeric_answer":
   "5", "3/2", "sqrt(8)", "2*sqrt(5)",
   "8*pi"
7. If any rule is violated, the output
   is considered WRONG.

-------- OUTPUT FORMAT --------
{
  "reasoning": "<reasoning using \\n>",
  "numeric_answer": "<final answer>"
}

---------- PROBLEM ----------
{problem})TPL";

// Stage one of convert-then-solve: restate in Euclidean form, do not solve.
inline constexpr std::string_view kConversionTemplate = R"TPL(You are rewriting a geometry problem.
Restate the problem below as an equivalent problem in pure Euclidean
(synthetic) geometry language, without coordinates or vectors.
You MUST follow ALL rules exactly.

---------- RULES ----------
1. Preserve every given quantity, relation, and the exact
   quantity that is asked for.
2. Do NOT solve the problem.
3. Output MUST be valid JSON only.
4. Do NOT include markdown formatting,
   code blocks, or extra text.
5. The JSON must contain EXACTLY one key:
   - "euclidean_problem"
6. "euclidean_problem":
   - MUST be a string.
   - MUST NOT contain literal line breaks.

-------- OUTPUT FORMAT --------
{
  "euclidean_problem": "<restated problem>"
}

---------- PROBLEM ----------
{problem})TPL";

inline constexpr std::string_view kProblemSlot = "{problem}";

inline std::string fill_template(std::string_view tpl, std::string_view body) {
    const auto pos = tpl.find(kProblemSlot);
    std::string out;
    out.reserve(tpl.size() + body.size());
    out.append(tpl.substr(0, pos));
    out.append(body);
    out.append(tpl.substr(pos + kProblemSlot.size()));
    return out;
}

inline std::string build_solve_prompt(std::string_view problem_body) {
    return fill_template(kSolveTemplate, problem_body);
}

inline std::string build_prompt(const Problem& p, Representation r) {
    const std::string& body = p.variant(r);
    if (body.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw MissingVariant("problem \"" + p.id + "\" has no " + std::string(to_key(r)) + " variant");
    }
    return build_solve_prompt(body);
}

// Euclidean variants are restated as well, so every representation goes
// through the same two-stage pipeline.
inline std::string build_conversion_prompt(const Problem& p, Representation r) {
    const std::string& body = p.variant(r);
    if (body.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw MissingVariant("problem \"" + p.id + "\" has no " + std::string(to_key(r)) + " variant");
    }
    return fill_template(kConversionTemplate, body);
}

}  // namespace georep
