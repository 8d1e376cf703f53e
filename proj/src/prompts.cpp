#include "tgrag/prompts.hpp"

namespace tgrag::prompts {

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out(tmpl);
    for (const auto& [key, value] : values) {
        const std::string needle = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = out.find(needle, pos)) != std::string::npos) {
            out.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    return out;
}

const std::string_view kExtraction = R"P(Task:
Given a text document that is potentially relevant to this activity and a list of entity types, identify all entities of those types from the text and all relationships among the identified entities.

Delimiters:
- <tuple_delimiter> below stands for the token {tuple_delimiter}
- <record_delimiter> below stands for the token {record_delimiter}
- <completion_delimiter> below stands for the token {completion_delimiter}

Steps:
(1) Identify all entities. For each identified entity, extract the following information:
 - entity_name: Name of the entity, capitalized
 - entity_type: One of the following types: [{entity_types}]
 - entity_description: Comprehensive description of the entity's attributes and activities
 Format each entity as ("entity"<tuple_delimiter><entity_name><tuple_delimiter><entity_type><tuple_delimiter><entity_description>)
(2) From the entities identified in step 1, identify all pairs of (source_entity, target_entity) that are *clearly related* to each other. For each pair of related entities, extract the following information:
 - source_entity: name of the source entity, as identified in step 1
 - target_entity: name of the target entity, as identified in step 1
 - relationship_description: explanation as to why you think the source entity and the target entity are related
 - relationship_strength: A numeric score showing the strength of the relationship between the source and target entities
 Format each relationship as ("relationship"<tuple_delimiter><source_entity><tuple_delimiter><target_entity><tuple_delimiter><relationship_description><tuple_delimiter><relationship_strength>)
(3) Return output in English as a single list of all the entities and relationships identified in steps 1 and 2. Use <record_delimiter> as the list delimiter.
(4) When finished, output <completion_delimiter>.

Examples:

Entity_types: [{example_types}]
Text: {example_text}
Output:
{example_output}

Real Data:

Entity_types: [{entity_types}]
Text: {input_text}
Output:
)P";

const std::string_view kExtractionExampleTypes = "person, technology, mission, organization, location";

const std::string_view kExtractionExampleText =
    R"P(Alex's frustration was overshadowed by Taylor's certainty. Their competitive tension kept him alert, as his and Jordan's commitment to discovery felt like a silent rebellion against Cruz's controlling vision. Unexpectedly, Taylor paused beside Jordan, observing the device with reverence. "If we can understand this tech, it could change the game for all of us," Taylor said quietly. Their earlier dismissal had shifted to reluctant respect, and a brief, silent truce formed between Jordan and Taylor. This small but noticeable change was acknowledged by Alex, who knew they had all arrived here through different paths.)P";

const std::string_view kDecomposition = R"P(Task: Break down a question containing multiple years into individual questions for each year. Each question should include the year and the specific question related to that year.

!!! output format must like [<year><SEP><question>]!!!
!!! output format must like [<year><SEP><question>]!!!
!!! output format must like [<year><SEP><question>]!!!
!!!Do not output "Here is the summary of the provided text" Or similarly, directly output the output!!!
!!!Do not output many answer, just choose one, directly output the output!!!
the output only is [<year><SEP><question>], Do not have any other text.

Examples:
Example 1: question: "How many people worked for the Audi Group worldwide in 2017 and 2023, respectively?" output: [2017<SEP>"How many people worked for the Audi Group worldwide in 2017"] [2023<SEP>"How many people worked for the Audi Group worldwide in 2023"]
Example 2: question: "How much CO2 was saved through Audi's Aluminum Closed Loop process in 2019 compared to the Aluminum Closed Loop Pilot Project in 2017?" output: [2019<SEP>"How much CO2 was saved through Audi's Aluminum Closed Loop process in 2019"] [2017<SEP>"How much CO2 was saved through Audi's Aluminum Closed Loop Pilot Project in 2017"]
Example 3: question: "What were the energy intensity of Audi's car production in 2020, 2019 and 2017 respectively?" output: [2020<SEP>"What was the energy intensity of Audi's car production in 2020?"] [2019<SEP>"What was the energy intensity of Audi's car production in 2019?"] [2017<SEP>"What was the energy intensity of Audi's car production in 2017?"]
Example 4: question: "How does Audi's electric vehicle model launch plan in 2023-2025 compare to its electrification efforts in 2021-2022?" output: [2023-2025<SEP>"How does Audi's electric vehicle model launch plan in 2023-2025?"] [2021-2022<SEP>"How does Audi's electrification efforts in 2021-2022?"]

Real Data:
question:{question}
output:)P";

const std::string_view kSubAnswer = R"P(Role:
You are a helpful assistant who can answer questions about the data in the provided table.

Goal:
Use the relevant data provided in the table to answer questions about the data in the table. If you don't know the answer, just say 'I'm sorry I don't know the answer' directly.

Output format:
The output needs to be concise, which is the conclusion of your final answer to this question. Do not output the thought process.

Question: {question}

Data tables: {context_data})P";

const std::string_view kFinalAnswer = R"P(Role:
You now need to answer this question based on the completed sub questions and corresponding answers I have provided to you. I have broken down the question you need to answer into multiple different sub questions and generated corresponding answers. You need to answer this question based on the completed sub questions and corresponding answers. If you don't know the answer, just say so. Do not make anything up.

Output format:
The output needs to be concise, which is the conclusion of your final answer to this question. Do not output the thought process

Input Data:
final question: {question}
sub questions and corresponding answers: {qa_dict})P";

const std::string_view kAbstention = "I'm sorry I don't know the answer";

const std::string_view kBareQuestion = R"P(Answer the following question concisely. If you don't know the answer, just say 'I'm sorry I don't know the answer'.

Question: {question})P";

const std::string_view kJudge = R"P(Task Overview:
You are tasked with evaluating user answers based on a given question, reference answer, and additional reference text. Your goal is to assess the correctness of the user answer using a specific metric.

Evaluation Criteria:
(1) Yes/No Questions: Verify if the user's answer aligns with the reference answer in terms of a "yes" or "no" response.
(2) Short Answers/Directives: Ensure key details such as numbers, specific nouns/verbs, and dates match those in the reference answer.
(3) Abstractive/Long Answers: The user's answer can differ in wording but must convey the same meaning and contain the same key information as the reference answer to be considered correct.

Evaluation Process:
(1) Identify the type of question presented.
(2) Apply the relevant criteria from the Evaluation Criteria.
(3) Compare the user's answer against the reference answer accordingly.
(4) Consult the reference text for clarification when needed.
(5) Score the answer with a binary label 0 or 1, where 0 denotes wrong and 1 denotes correct.
(6) Note: If the user answer is 0 or an empty string, it should get a 0 score.

Real Data:
Question: {question}
User Answer: {sys_ans}
Reference Answer: {ref_ans}
Reference Text: {ref_text}

Output:
Evaluation Form (score ONLY):
- Correctness: )P";

const std::string_view kSummary = R"P(You are an AI assistant tasked with reading and understanding a lengthy text and generating a summary in pure text form. The summary should adhere to the following specific requirements:
1. The summary should cover a broad range of information, aiming to include the vast majority of details from the original text.
2. Minimize the use of pronouns and clearly specify the names of entities to ensure clarity.
3. Retain any time-related data and other crucial details without omitting them, ensuring the summary is comprehensive and accurate.
4. Avoid using quotation marks or other special symbols, and present the summary in plain text without complex formatting or lists, structuring it into standard paragraphs.
Please ensure the output aligns with these requirements.

Text:
{text})P";

const std::string_view kKeyPoints = R"P(Task:
You are an artificial intelligence assistant, please extract key points from the article according to the following rules:
1. The key points should be independent of each other and the content should avoid overlapping as much as possible.
2. Key points should be concise, accurate, and complete, especially when it comes to numbers, names, and dates.
3. The key points should not have complex formats or line breaks, just one or two sentences
4. If the key points do not involve events that occurred in year, please ignore them and keep only discussing events that occurred in year.
5. Basically, pronouns such as "he, she, them, it" cannot be used, and it is necessary to clearly indicate the entity you are referencing in the key points.
6. The following opening phrases are not allowed: -The article discussed -The article shows -The article emphasizes -The speaker said -The author mentioned... and so on.

Output Format:
The response should be JSON formatted as follows:
{"point-id": "point"}
The beginning and end of the answer must be {}
!!!The answer is only in JSON format, Don't output here is the output Or similarly, directly output the output!!!

Real Data:
Input: {summary}
Output:)P";

const std::string_view kSingleTimeQa = R"P(Please generate ten questions and their answers based on the input text.
Specific Requirements:
1. The questions should be diverse, covering different angles such as people, numbers, places, etc.
2. The information in the questions should be rich and clear enough to avoid ambiguity in the answers.
3. Design three challenging questions, avoiding simple string matching.
4. Each question's answer should be concise, avoiding redundancy or repetition of the information in the question.
5. The events included in the questions must have clear time attributes as specified in the original text. If the event's time cannot be determined, abandon that question and find another event to create a question.(very important)
6. Each question must contain a time attribute. In other words, the question must include a specific time reference.(very important)

Output Format:
The output format should be in JSON format (a list of such objects):
{ "Question": "Question", "Answer": "Answer", "OriginalText": "Original content of the text (keep the original content and format)" }

OriginalText: {text})P";

const std::string_view kNonTimeQa = R"P(Please generate ten questions and their answers based on the input text.
Specific Requirements:
1. The questions should be diverse, covering different angles such as people, numbers, places, etc.
2. The information in the questions should be rich and clear enough to avoid ambiguity in the answers.
3. Design three challenging questions, avoiding simple string matching.
4. Each question's answer should be concise, avoiding redundancy or repetition of the information in the question.
5. The questions must be about facts that do not change over time.(very important)
6. No question may contain a time attribute. In other words, the question must not include any year or date reference.(very important)

Output Format:
The output format should be in JSON format (a list of such objects):
{ "Question": "Question", "Answer": "Answer", "OriginalText": "Original content of the text (keep the original content and format)" }

OriginalText: {text})P";

const std::string_view kDualTimeQa = R"P(You are an artificial intelligence assistant, and I now need you to help me generate one time-series QA pairs. I will provide you with the key points and corresponding original texts of two similar events from two annual reports.
Specific Requirements:
1. The question must be answered using the original texts corresponding to these two timestamps, and there should be temporal comparability between these original texts.
2. The questions should be close-ended.
3. The question needs to be an inquiry about specific entities, numbers, or time, not about abstract concepts (such as Audi's strategy, Audi's plans in the field of electric vehicles)
4. The information in the question should be sufficient and clear, avoiding ambiguous answers.
5. Multiple sub questions cannot be included in the problem, and the problem should be clear and specific.
6. The problem must contain two timestamps, year1 and year2.
7. The answer should be concise and clear, avoiding being lengthy or repetitive.

Output Format:
The output format should be in JSON format:
{ "Question": "Question", "Answer": "Answer", "Original text from {year1} report": "<original text from {year1} report>", "Original text from {year2} report": "<original text from {year2} report>" }

Real Data:
Input Data:
keypoint in {year1} Annual Report:{keypoint1}, Corresponding original text: {text1};
keypoint in {year2} Annual Report:{keypoint2}, Corresponding original text: {text2}
Output:)P";

const std::string_view kMultiTimeQa = R"P(You are an artificial intelligence assistant, and I now need you to help me generate one time-series QA pairs. I will provide you with the key points and corresponding original texts of {count} similar events from {count} annual reports.
Specific Requirements:
1. The question must be answered using the original texts corresponding to these {count} timestamps, and there should be temporal comparability between these original texts.
2. The questions should be close-ended.
3. The question needs to be an inquiry about specific entities, numbers, or time, not about abstract concepts (such as Audi's strategy, Audi's plans in the field of electric vehicles)
4. The information in the question should be sufficient and clear, avoiding ambiguous answers.
5. Multiple sub questions cannot be included in the problem, and the problem should be clear and specific.
6. The problem must contain all {count} timestamps: {years}.
7. The answer should be concise and clear, avoiding being lengthy or repetitive.

Output Format:
The output format should be in JSON format:
{ "Question": "Question", "Answer": "Answer", {output_fields} }

Real Data:
Input Data:
{inputs}
Output:)P";

}  // namespace tgrag::prompts
