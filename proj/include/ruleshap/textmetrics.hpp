// Licensed under the Apache License 2.0 (see LICENSE file).
//
// Text side of an audit: judge prompts and their parsing, proxy metrics
// computed from response text, topic deduplication and the chat client.

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ruleshap/dataset.hpp"

namespace ruleshap {

inline constexpr std::string_view kTopicExtractionKind = "topic_extraction";

// Judge prompt kinds: the 11 input features, the 3 judged outputs
// (framing_effect, information_overload, oversimplification) and
// topic_extraction.
bool is_judge_kind(std::string_view kind);
// Label substituted into the score suffix, e.g. "conceptually dense".
std::string_view judge_label(std::string_view kind);

struct JudgePrompt {
  std::string kind;
  std::string text;
  bool numbered_list = false;  // topic extraction; otherwise ES/SE score
};

// `subject` is the topic for input kinds and the explanation text for
// output kinds. Unknown kinds raise a schema error.
JudgePrompt render_judge_prompt(std::string_view kind, std::string_view subject);

struct TopicExtractionRequest {
  int n_topics = 60;
  std::string domain;
  std::string dimension;  // property label, e.g. "technically complicated"
  int score = 1;
};

JudgePrompt render_topic_prompt(const TopicExtractionRequest& request);

// Default explanation request; `{topic}` is replaced.
inline constexpr std::string_view kDefaultExplainTemplate = "Explain {topic}";
std::string render_explain_prompt(std::string_view topic,
                                  std::string_view templ = kDefaultExplainTemplate);

struct JudgeScore {
  int score = 0;
  std::string explanation;
};

// Parse error without an ES line, range error for ES outside 1..5.
JudgeScore parse_judge_response(std::string_view raw);
std::string format_judge_response(const JudgeScore& s);

// Numbered topic list ("1. Label: why") to labels.
std::vector<std::string> parse_topic_list(std::string_view raw);

// Vowel-group syllable estimate; a trailing "es"/"ed" does not add one.
int estimate_syllables(std::string_view word);
double gunning_fog(std::string_view text);

struct TextProviderConfig {
  std::string endpoint;  // full chat completions URL
  std::string model;
  double temperature = 0.0;
  double top_p = 0.0;
  int max_chunk_tokens = 512;
  double avg_chars_per_token = 4.0;
  int retries = 3;
  int timeout_seconds = 60;
  int backoff_ms = 500;  // doubled after each failed attempt
  std::string api_key_env = "AUDIT_API_KEY";

  void validate() const;  // config error on out-of-range fields
};

std::size_t max_chunk_chars(const TextProviderConfig& cfg);

// Splits at the character budget on the nearest preceding whitespace
// (hard cut inside long words). Separating whitespace is dropped.
std::vector<std::string> split_chunks(std::string_view text, std::size_t max_chars);

struct ChunkLabel {
  std::string label;  // negative_0 .. positive_4, objective_0 / subjective_1
  double confidence = 1.0;
};

using ChunkScorer = std::function<ChunkLabel(std::string_view chunk)>;

enum class ChunkMetric { kSentiment, kSubjectivity };

// Sentiment polarity in [-1, 1] from the class digit; subjectivity as
// P(subjective). Both weighted by chunk length. Scorer failures are retried
// cfg.retries times, then reported as a provider error.
double chunk_and_aggregate(std::string_view text, const ChunkScorer& scorer, ChunkMetric metric,
                           const TextProviderConfig& cfg);

using SimilarityFn = std::function<double(std::string_view, std::string_view)>;

// Cosine of character-trigram counts after lowercasing, collapsing
// whitespace and padding with one space on each side.
double trigram_cosine(std::string_view a, std::string_view b);

// Greedy in input order: a topic is dropped when its similarity to any kept
// topic reaches `threshold`.
std::vector<std::string> dedup_topics(const std::vector<std::string>& topics,
                                      const SimilarityFn& similarity = trigram_cosine,
                                      double threshold = 0.9);

// Request body sent to an OpenAI-compatible chat completions endpoint.
std::string chat_request_body(std::string_view prompt, std::optional<std::string_view> system,
                              const TextProviderConfig& cfg);

// Config error if the credential variable is unset (checked before any
// network call); provider error once retries are exhausted.
std::string llm_generate(std::string_view prompt, std::optional<std::string_view> system,
                         const TextProviderConfig& cfg);

// Classifier over HTTP: POSTs {"text": chunk} and accepts either
// {"label", "score"} or a list of them (highest score wins).
ChunkScorer http_classifier(const TextProviderConfig& cfg);
// Raises a config error on first use, so metrics must be configured.
ChunkScorer null_classifier(std::string_view what);

struct CachedGeneration {
  std::string id;
  std::string prompt;
  std::string system;
  std::string text;
};

// Append-only JSON-lines cache of generated texts, keyed by id.
class GenerationCache {
 public:
  explicit GenerationCache(std::filesystem::path path);

  std::optional<CachedGeneration> find(const std::string& id) const;
  void store(const CachedGeneration& entry);
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  std::map<std::string, CachedGeneration> entries_;
  mutable std::mutex mutex_;
};

using GenerateFn =
    std::function<std::string(std::string_view prompt, std::optional<std::string_view> system)>;

struct AbstractionSources {
  GenerateFn judge;      // answers the score prompts
  GenerateFn explainer;  // the audited model
  ChunkScorer sentiment;
  ChunkScorer subjectivity;
  std::string system_instruction;  // optional bias injection
  std::string explain_template = std::string(kDefaultExplainTemplate);
  TextProviderConfig chunking;
  GenerationCache* cache = nullptr;  // explanations, optional
  int jobs = 1;
};

// Scores each topic on the 11 inputs, asks for an explanation, then derives
// the 7 outputs from it.
AbstractionMatrix collect_abstractions(const std::vector<TopicRecord>& topics,
                                       const AbstractionSources& sources);

}  // namespace ruleshap
