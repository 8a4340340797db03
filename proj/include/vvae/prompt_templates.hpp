#ifndef VVAE_PROMPT_TEMPLATES_HPP
#define VVAE_PROMPT_TEMPLATES_HPP

#include <string_view>

// Default prompt wording (version 1). Each body can be replaced at runtime
// with a text file of the same name; see load_template().
namespace vvae::prompts {

inline constexpr int kPromptVersion = 1;

inline constexpr std::string_view kExtractionSystem =
    "You are a careful annotator of chat transcripts. Return a single JSON object and nothing else.";

inline constexpr std::string_view kPersonaExtraction =
    R"(Below is a conversation between a user and an AI character, followed by the AI character's next reply.
Infer the AI character's latent persona from the context and the reply.

<context>
{context}
</context>

<response>
{response}
</response>

Fill in every field below. Write the exact string "none" for a field the conversation gives no evidence for. Do not guess.
- catchphrase: a phrase the AI character habitually repeats (e.g. "oh my god")
- frequent_emoji: one emoji the AI character uses frequently
- tone: tonal register of the AI character (e.g. patient, tender, irritable)
- nickname: what the AI character calls the user (e.g. darling)
- relationship: exactly one of stranger, acquaintance, friend, lover, enemy
- vibe: the mood of the exchange (e.g. joyful)
- topic: the topical focus of the exchange (e.g. lunch)
- personality: a stable personality trait of the AI character (e.g. outgoing)
- hobby: a hobby of the AI character (e.g. swimming)

Answer with one JSON object with exactly these keys:
{"catchphrase": "...", "frequent_emoji": "...", "tone": "...", "nickname": "...", "relationship": "...", "vibe": "...", "topic": "...", "personality": "...", "hobby": "..."})";

inline constexpr std::string_view kRepairRequest =
    "Your previous reply was not a valid JSON object. Reply again with only the JSON object, using \"none\" "
    "for unknown fields.";

inline constexpr std::string_view kUnstructuredSystem =
    "You are a careful analyst of chat transcripts. Answer in plain prose.";

inline constexpr std::string_view kUnstructuredExtraction =
    R"(Below is a conversation between a user and an AI character, followed by the AI character's next reply.

<context>
{context}
</context>

<response>
{response}
</response>

Without using any predefined categories, analyze:
(1) the underlying causes that led the AI character to produce this reply;
(2) the distinctive characteristics of the AI character revealed by this reply.)";

inline constexpr std::string_view kChatSystem =
    "You are role-playing a character in a casual chat. Stay in character and reply like a real person would.";

inline constexpr std::string_view kFewShotChat =
    R"(Persona of the character you play:
{persona}
{examples}
<context>
{context}
</context>

Write only the character's next reply.)";

} // namespace vvae::prompts

#endif // VVAE_PROMPT_TEMPLATES_HPP
