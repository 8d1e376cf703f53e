#pragma once

#include <map>
#include <string>
#include <string_view>

namespace tgrag::prompts {

/// Replaces every `{key}` for the given keys; other braces are left alone.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values);

/// Entity/relation extraction. Placeholders: {tuple_delimiter},
/// {record_delimiter}, {completion_delimiter}, {entity_types}, {input_text},
/// {example_output}. Everything before the "Examples:" marker is the
/// instruction block.
extern const std::string_view kExtraction;
/// Records of the bundled extraction example, as (tag, fields...) rows.
extern const std::string_view kExtractionExampleText;
extern const std::string_view kExtractionExampleTypes;

/// Temporal query decomposition. Placeholder: {question}.
extern const std::string_view kDecomposition;

/// Per-sub-question answer. Placeholders: {question}, {context_data}.
extern const std::string_view kSubAnswer;
/// Final synthesis. Placeholders: {question}, {qa_dict}.
extern const std::string_view kFinalAnswer;
/// Phrase the sub-answer prompt asks the model to use when it cannot answer.
extern const std::string_view kAbstention;
/// Bare question for the no-retrieval comparison mode. Placeholder: {question}.
extern const std::string_view kBareQuestion;

/// Binary LLM judge. Placeholders: {question}, {sys_ans}, {ref_ans}, {ref_text}.
extern const std::string_view kJudge;

/// Dataset building.
extern const std::string_view kSummary;          ///< {text}
extern const std::string_view kKeyPoints;        ///< {summary}
extern const std::string_view kSingleTimeQa;     ///< {text}
extern const std::string_view kNonTimeQa;        ///< {text}
extern const std::string_view kDualTimeQa;       ///< {year1} {keypoint1} {text1} {year2} {keypoint2} {text2}
extern const std::string_view kMultiTimeQa;      ///< {count} {years} {output_fields} {inputs}

}  // namespace tgrag::prompts
