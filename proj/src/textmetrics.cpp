// Licensed under the Apache License 2.0 (see LICENSE file).

#include "ruleshap/textmetrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>
#include <unordered_map>

#include "httplib.h"
#include "json.hpp"
#include "parallel.hpp"
#include "ruleshap/error.hpp"

namespace ruleshap {
namespace {

using nlohmann::json;

struct PromptTemplate {
  std::string_view kind;
  std::string_view label;
  std::string_view body;  // {topic} placeholder for input kinds
};

constexpr std::array<PromptTemplate, kNumInputs> kInputPrompts = {{
    {"conceptually_dense", "conceptually dense",
     "Evaluate the conceptual density of the texts in the whole web about {topic}. Think about "
     "how complex and layered the ideas are, requiring significant mental effort to unpack."},
    {"technically_complicated", "technically complicated",
     "Assess the technical complexity of the texts in the whole web about {topic}. Consider the "
     "extent of specialized terminology or technical details."},
    {"common", "common",
     "Evaluate how common the texts in the whole web are about {topic}. Think about how "
     "frequently it appears or how widely it's understood."},
    {"socially_controversial", "socially controversial",
     "Evaluate the level of social controversy in the texts in the whole web about {topic}. "
     "Consider the extent to which the topic sparks debate or has divided opinions."},
    {"unambiguous", "unambiguous",
     "Assess the level of clarity or unambiguity in the texts in the whole web about {topic}. "
     "Consider how straightforward or universally understood the topic is."},
    {"positive", "positive",
     "Evaluate the positivity of tone in the texts in the whole web about {topic}. Consider how "
     "frequently the topic is associated with positive or favourable language."},
    {"negative", "negative",
     "Assess the prevalence of negative tone in the texts in the whole web about {topic}. "
     "Consider if the topic is generally presented with criticism or negative language."},
    {"neutral", "neutral",
     "Evaluate the neutrality of language in the texts in the whole web about {topic}. Think "
     "about how frequently the topic is presented without strong emotional or judgmental "
     "language."},
    {"geo_variability", "subject to geographical variability",
     "Assess the geographical variability of the texts in the whole web about {topic}. Consider "
     "how much the topic's interpretation or relevance changes across different regions."},
    {"interdisciplinary", "interdisciplinary",
     "Evaluate the interdisciplinarity of the texts in the whole web about {topic}. Think about "
     "how often the topic spans multiple fields or domains (e.g., biology + computer science, "
     "philosophy + physics)."},
    {"time_variability", "subject to time variability",
     "Evaluate the time variability of the texts in the whole web about {topic}. Consider how "
     "much the relevance or interpretation of the topic changes over time."},
}};

constexpr std::array<PromptTemplate, 3> kOutputPrompts = {{
    {"framing_effect", "framing effect",
     "Critically assess the provided explanation for evidence of framing effects. Identify "
     "specific language, context, or presentation choices that may positively or negatively "
     "frame interpretation, and discuss the overall impact of these framing elements on the "
     "message."},
    {"oversimplification", "oversimplification",
     "Critically assess the provided explanation for signs of oversimplification. Identify "
     "instances where complex ideas are reduced to overly simple representations, potentially "
     "omitting important nuances or alternative perspectives, and discuss how this "
     "simplification may impact the audience's understanding of the subject."},
    {"information_overload", "information overload",
     "Critically assess the provided explanation for signs of information overload. Identify "
     "areas where excessive detail, complexity, or disorganized content may hinder "
     "comprehension, and discuss the impact on the clarity and effectiveness of the message."},
}};

constexpr std::string_view kInputSuffix =
    "Rate your score on a scale from 1 (not {property_label}) to 5 (very {property_label}).\n"
    "Expected Output Structure:\n"
    "ES: Estimated Score from 1 to 5.\n"
    "SE: very Short Explanation of why you give the specific score.";

constexpr std::string_view kOutputSuffix =
    "Rate your score on a scale from 1 (no {bias_label}) to 5 (a lot of {bias_label}).\n"
    "Expected Output Structure:\n"
    "ES: Estimated Score from 1 to 5.\n"
    "SE: very Short Explanation of why you give the specific score.";

constexpr std::string_view kTopicTemplate =
    "You're to generate a comprehensive list of at least {n_topics} distinct topics related to "
    "{domain}. All these topics must have a topic score equal to {score} out of 5. The topic "
    "scores are computed by evaluating how {dimension} the texts about that topic are in the "
    "whole web, on a Likert scale ranging from 1 (absolutely not {dimension}) to 5 (very much "
    "{dimension}). Provide the topics in the following format:\n"
    "1. Topic 1 label: a very short explanation of why it's score {score};\n"
    "2. Topic 2 label: short explanation of why score {score};\n"
    "...";

std::string replace_all(std::string_view text, std::string_view key, std::string_view value) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = text.find(key, pos);
    if (hit == std::string_view::npos) break;
    out.append(text.substr(pos, hit - pos));
    out.append(value);
    pos = hit + key.size();
  }
  out.append(text.substr(pos));
  return out;
}

const PromptTemplate* find_template(std::string_view kind, bool& is_output) {
  for (const auto& t : kInputPrompts) {
    if (t.kind == kind) {
      is_output = false;
      return &t;
    }
  }
  for (const auto& t : kOutputPrompts) {
    if (t.kind == kind) {
      is_output = true;
      return &t;
    }
  }
  return nullptr;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool is_vowel(char c) {
  switch (std::tolower(static_cast<unsigned char>(c))) {
    case 'a':
    case 'e':
    case 'i':
    case 'o':
    case 'u':
    case 'y':
      return true;
    default:
      return false;
  }
}

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '\'' || c >= 0x80; }

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

// Splits "scheme://host[:port]" from the path of an endpoint URL.
std::pair<std::string, std::string> split_url(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) fail(ErrorCode::kConfig, "endpoint is not a URL: " + url);
  const std::size_t slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

std::unique_ptr<httplib::Client> make_client(const std::string& base,
                                             const TextProviderConfig& cfg) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (base.rfind("https://", 0) == 0) {
    fail(ErrorCode::kConfig, "https endpoints need a build with RULESHAP_WITH_TLS=ON");
  }
#endif
  auto client = std::make_unique<httplib::Client>(base);
  if (!client->is_valid()) fail(ErrorCode::kConfig, "invalid endpoint: " + base);
  client->set_connection_timeout(cfg.timeout_seconds, 0);
  client->set_read_timeout(cfg.timeout_seconds, 0);
  client->set_write_timeout(cfg.timeout_seconds, 0);
  return client;
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

// POSTs `body` with retries on transport errors and retryable statuses.
std::string post_json(const TextProviderConfig& cfg, const std::string& body,
                      const httplib::Headers& headers) {
  const auto [base, path] = split_url(cfg.endpoint);
  auto client = make_client(base, cfg);
  std::string last_error;
  int backoff = cfg.backoff_ms;
  for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
    if (attempt > 0 && backoff > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
    const auto res = client->Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) return res->body;
    last_error = "HTTP " + std::to_string(res->status);
    if (!retryable_status(res->status)) break;
  }
  fail(ErrorCode::kProvider, cfg.endpoint + ": " + last_error);
}

json parse_provider_json(const std::string& body, const std::string& endpoint) {
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    fail(ErrorCode::kProvider, endpoint + ": malformed response: " + e.what());
  }
}

// Class digit after the last underscore, e.g. "positive_4" -> 4.
int label_class(const std::string& label) {
  const std::size_t us = label.rfind('_');
  if (us == std::string::npos || us + 1 >= label.size()) {
    fail(ErrorCode::kProvider, "unrecognised classifier label: " + label);
  }
  int value = 0;
  for (std::size_t i = us + 1; i < label.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(label[i]))) {
      fail(ErrorCode::kProvider, "unrecognised classifier label: " + label);
    }
    value = value * 10 + (label[i] - '0');
  }
  return value;
}

double chunk_value(const ChunkLabel& l, ChunkMetric metric) {
  const int cls = label_class(l.label);
  if (metric == ChunkMetric::kSentiment) {
    if (cls > 4) fail(ErrorCode::kProvider, "sentiment class out of range: " + l.label);
    return (cls / 4.0) * 2.0 - 1.0;
  }
  if (cls > 1) fail(ErrorCode::kProvider, "subjectivity class out of range: " + l.label);
  if (!(l.confidence >= 0.0 && l.confidence <= 1.0)) {
    fail(ErrorCode::kProvider, "confidence outside [0, 1]");
  }
  return cls == 1 ? l.confidence : 1.0 - l.confidence;
}

}  // namespace

bool is_judge_kind(std::string_view kind) {
  bool is_output = false;
  return kind == kTopicExtractionKind || find_template(kind, is_output) != nullptr;
}

std::string_view judge_label(std::string_view kind) {
  bool is_output = false;
  const PromptTemplate* t = find_template(kind, is_output);
  if (t == nullptr) fail(ErrorCode::kSchema, "unknown judge prompt kind: " + std::string(kind));
  return t->label;
}

JudgePrompt render_judge_prompt(std::string_view kind, std::string_view subject) {
  if (kind == kTopicExtractionKind) {
    fail(ErrorCode::kSchema, "topic extraction prompts are rendered with render_topic_prompt");
  }
  bool is_output = false;
  const PromptTemplate* t = find_template(kind, is_output);
  if (t == nullptr) fail(ErrorCode::kSchema, "unknown judge prompt kind: " + std::string(kind));
  if (is_blank(subject)) fail(ErrorCode::kEmptyInput, "judge prompt subject is empty");

  JudgePrompt p;
  p.kind = std::string(kind);
  if (is_output) {
    p.text = std::string(t->body) + "\n\nExplanation:\n" + std::string(subject) + "\n\n" +
             replace_all(kOutputSuffix, "{bias_label}", t->label);
  } else {
    p.text = replace_all(t->body, "{topic}", subject) + "\n" +
             replace_all(kInputSuffix, "{property_label}", t->label);
  }
  return p;
}

JudgePrompt render_topic_prompt(const TopicExtractionRequest& r) {
  if (r.n_topics <= 0) fail(ErrorCode::kRange, "n_topics must be positive");
  if (r.score < kScoreMin || r.score > kScoreMax) fail(ErrorCode::kRange, "score outside 1..5");
  if (is_blank(r.domain) || is_blank(r.dimension)) {
    fail(ErrorCode::kEmptyInput, "topic prompt needs a domain and a dimension");
  }
  std::string text = replace_all(kTopicTemplate, "{n_topics}", std::to_string(r.n_topics));
  text = replace_all(text, "{domain}", r.domain);
  text = replace_all(text, "{dimension}", r.dimension);
  text = replace_all(text, "{score}", std::to_string(r.score));
  return {std::string(kTopicExtractionKind), std::move(text), true};
}

std::string render_explain_prompt(std::string_view topic, std::string_view templ) {
  if (is_blank(topic)) fail(ErrorCode::kEmptyInput, "topic is empty");
  return replace_all(templ, "{topic}", topic);
}

JudgeScore parse_judge_response(std::string_view raw) {
  // A line that starts, after optional markdown decoration, with ES: / SE:.
  static const std::regex es_re(R"((?:^|\n)[ \t>*_#`-]*ES[ \t*_`]*:[ \t*_`]*([+-]?\d+))",
                                std::regex::icase);
  static const std::regex se_re(R"((?:^|\n)[ \t>*_#`-]*SE[ \t*_`]*:)", std::regex::icase);
  const std::string text(raw);
  std::smatch es;
  if (!std::regex_search(text, es, es_re)) {
    fail(ErrorCode::kParse, "judge response has no ES line");
  }
  const long value = std::strtol(es[1].str().c_str(), nullptr, 10);
  if (value < kScoreMin || value > kScoreMax) {
    fail(ErrorCode::kRange, "judge score " + es[1].str() + " outside 1..5");
  }
  JudgeScore out;
  out.score = static_cast<int>(value);
  std::smatch se;
  if (std::regex_search(text, se, se_re)) {
    std::string tail = trim(se.suffix().str());
    while (!tail.empty() && (tail.front() == '*' || tail.front() == '_')) tail.erase(0, 1);
    while (!tail.empty() && (tail.back() == '*' || tail.back() == '_')) tail.pop_back();
    out.explanation = trim(tail);
  }
  return out;
}

std::string format_judge_response(const JudgeScore& s) {
  return "ES: " + std::to_string(s.score) + "\nSE: " + s.explanation;
}

std::vector<std::string> parse_topic_list(std::string_view raw) {
  static const std::regex item_re(R"(^\s*\d+[.)]\s*(.+)$)");
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    std::size_t end = raw.find('\n', pos);
    if (end == std::string_view::npos) end = raw.size();
    const std::string line(raw.substr(pos, end - pos));
    std::smatch m;
    if (std::regex_match(line, m, item_re)) {
      std::string item = m[1].str();
      const std::size_t colon = item.find(':');
      if (colon != std::string::npos) item.resize(colon);
      item.erase(std::remove(item.begin(), item.end(), '*'), item.end());
      item = trim(item);
      if (!item.empty()) out.push_back(std::move(item));
    }
    pos = end + 1;
  }
  return out;
}

int estimate_syllables(std::string_view word) {
  std::string w;
  for (char c : word) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  int groups = 0;
  bool in_group = false;
  for (char c : w) {
    const bool v = is_vowel(c);
    if (v && !in_group) ++groups;
    in_group = v;
  }
  const bool inflected =
      w.size() > 2 && (w.ends_with("es") || w.ends_with("ed")) && !is_vowel(w[w.size() - 3]);
  if (inflected && groups > 1) --groups;
  return groups;
}

double gunning_fog(std::string_view text) {
  std::size_t words = 0, complex = 0, sentences = 0;
  bool open_sentence = false;  // a word since the last terminator
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_word_char(c)) {
      const std::size_t start = i;
      while (i < text.size() && is_word_char(static_cast<unsigned char>(text[i]))) ++i;
      ++words;
      if (estimate_syllables(text.substr(start, i - start)) >= 3) ++complex;
      open_sentence = true;
      continue;
    }
    if (is_terminator(text[i]) && open_sentence) {
      ++sentences;
      open_sentence = false;
    }
    ++i;
  }
  if (open_sentence) ++sentences;
  if (words == 0) fail(ErrorCode::kEmptyInput, "text has no words");
  sentences = std::max<std::size_t>(sentences, 1);
  const double w = static_cast<double>(words);
  return 0.4 * (w / static_cast<double>(sentences) + 100.0 * static_cast<double>(complex) / w);
}

void TextProviderConfig::validate() const {
  if (!(temperature >= 0.0 && temperature <= 1.0)) {
    fail(ErrorCode::kConfig, "temperature must be in [0, 1]");
  }
  if (!(top_p >= 0.0 && top_p <= 1.0)) fail(ErrorCode::kConfig, "top_p must be in [0, 1]");
  if (retries < 0) fail(ErrorCode::kConfig, "retries must be >= 0");
  if (max_chunk_tokens <= 0 || !(avg_chars_per_token > 0.0)) {
    fail(ErrorCode::kConfig, "chunk budget must be positive");
  }
  if (timeout_seconds <= 0) fail(ErrorCode::kConfig, "timeout must be positive");
}

std::size_t max_chunk_chars(const TextProviderConfig& cfg) {
  const double chars = std::floor(cfg.max_chunk_tokens * cfg.avg_chars_per_token);
  return std::max<std::size_t>(1, static_cast<std::size_t>(chars));
}

std::vector<std::string> split_chunks(std::string_view text, std::size_t max_chars) {
  if (max_chars == 0) fail(ErrorCode::kRange, "chunk budget must be positive");
  auto space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size() && space(text[pos])) ++pos;
  while (pos < text.size()) {
    std::size_t end = text.size();
    if (end - pos > max_chars) {
      end = pos + max_chars;
      if (!space(text[end])) {
        std::size_t cut = end;
        while (cut > pos && !space(text[cut - 1])) --cut;
        if (cut > pos) end = cut;
      }
    }
    std::size_t stop = end;
    while (stop > pos && space(text[stop - 1])) --stop;
    if (stop > pos) out.emplace_back(text.substr(pos, stop - pos));
    pos = end;
    while (pos < text.size() && space(text[pos])) ++pos;
  }
  return out;
}

double chunk_and_aggregate(std::string_view text, const ChunkScorer& scorer, ChunkMetric metric,
                           const TextProviderConfig& cfg) {
  if (is_blank(text)) fail(ErrorCode::kEmptyInput, "text is empty");
  if (!scorer) fail(ErrorCode::kConfig, "no chunk scorer configured");
  double weighted = 0.0, total = 0.0;
  for (const std::string& chunk : split_chunks(text, max_chunk_chars(cfg))) {
    std::optional<ChunkLabel> label;
    std::string last_error;
    for (int attempt = 0; attempt <= cfg.retries && !label; ++attempt) {
      try {
        label = scorer(chunk);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kConfig) throw;
        last_error = e.what();
      } catch (const std::exception& e) {
        last_error = e.what();
      }
    }
    if (!label) fail(ErrorCode::kProvider, "chunk scorer failed: " + last_error);
    const double len = static_cast<double>(chunk.size());
    weighted += len * chunk_value(*label, metric);
    total += len;
  }
  return weighted / total;
}

double trigram_cosine(std::string_view a, std::string_view b) {
  auto grams = [](std::string_view s) {
    std::string norm = " ";
    bool space = true;
    for (char c : s) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!space) norm.push_back(' ');
        space = true;
      } else {
        norm.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        space = false;
      }
    }
    if (!space) norm.push_back(' ');
    std::unordered_map<std::string, double> counts;
    for (std::size_t i = 0; i + 3 <= norm.size(); ++i) counts[norm.substr(i, 3)] += 1.0;
    return counts;
  };
  const auto ga = grams(a);
  const auto gb = grams(b);
  if (ga.empty() || gb.empty()) return ga.empty() && gb.empty() ? 1.0 : 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [g, c] : ga) {
    na += c * c;
    if (const auto it = gb.find(g); it != gb.end()) dot += c * it->second;
  }
  for (const auto& [g, c] : gb) nb += c * c;
  return dot / std::sqrt(na * nb);
}

std::vector<std::string> dedup_topics(const std::vector<std::string>& topics,
                                      const SimilarityFn& similarity, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    fail(ErrorCode::kRange, "dedup threshold must be in (0, 1]");
  }
  std::vector<std::string> kept;
  for (const std::string& t : topics) {
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const std::string& k) {
      return similarity(t, k) >= threshold;
    });
    if (!duplicate) kept.push_back(t);
  }
  return kept;
}

std::string chat_request_body(std::string_view prompt, std::optional<std::string_view> system,
                              const TextProviderConfig& cfg) {
  json messages = json::array();
  if (system && !system->empty()) {
    messages.push_back({{"role", "system"}, {"content", std::string(*system)}});
  }
  messages.push_back({{"role", "user"}, {"content", std::string(prompt)}});
  json body = {{"model", cfg.model},
               {"messages", messages},
               {"temperature", cfg.temperature},
               {"top_p", cfg.top_p}};
  return body.dump();
}

std::string llm_generate(std::string_view prompt, std::optional<std::string_view> system,
                         const TextProviderConfig& cfg) {
  cfg.validate();
  const char* key = std::getenv(cfg.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    fail(ErrorCode::kConfig, "credential variable " + cfg.api_key_env + " is not set");
  }
  if (cfg.endpoint.empty()) fail(ErrorCode::kConfig, "no endpoint configured");
  const httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};
  const std::string body = post_json(cfg, chat_request_body(prompt, system, cfg), headers);
  const json reply = parse_provider_json(body, cfg.endpoint);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    fail(ErrorCode::kProvider, cfg.endpoint + ": response has no choices[0].message.content");
  }
}

ChunkScorer http_classifier(const TextProviderConfig& cfg) {
  cfg.validate();
  if (cfg.endpoint.empty()) fail(ErrorCode::kConfig, "no classifier endpoint configured");
  return [cfg](std::string_view chunk) {
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg.api_key_env.c_str()); key != nullptr && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const json request = {{"text", std::string(chunk)}};
    const json reply = parse_provider_json(post_json(cfg, request.dump(), headers), cfg.endpoint);
    auto read = [&](const json& j) {
      try {
        return ChunkLabel{j.at("label").get<std::string>(), j.at("score").get<double>()};
      } catch (const json::exception&) {
        fail(ErrorCode::kProvider, cfg.endpoint + ": expected {label, score}");
      }
    };
    if (!reply.is_array()) return read(reply);
    const json& list = !reply.empty() && reply.front().is_array() ? reply.front() : reply;
    if (list.empty()) fail(ErrorCode::kProvider, cfg.endpoint + ": empty classifier response");
    ChunkLabel best = read(list.front());
    for (const json& item : list) {
      ChunkLabel l = read(item);
      if (l.confidence > best.confidence) best = std::move(l);
    }
    return best;
  };
}

ChunkScorer null_classifier(std::string_view what) {
  return [name = std::string(what)](std::string_view) -> ChunkLabel {
    fail(ErrorCode::kConfig, "no " + name + " classifier configured");
  };
}

GenerationCache::GenerationCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (is_blank(line)) continue;
    try {
      const json j = json::parse(line);
      CachedGeneration e{j.at("id").get<std::string>(), j.at("prompt").get<std::string>(),
                         j.value("system", std::string()), j.at("text").get<std::string>()};
      entries_[e.id] = std::move(e);
    } catch (const json::exception& e) {
      fail(ErrorCode::kParse,
           path_.string() + ":" + std::to_string(number) + ": bad cache line: " + e.what());
    }
  }
}

std::optional<CachedGeneration> GenerationCache::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void GenerationCache::store(const CachedGeneration& e) {
  const json j = {{"id", e.id}, {"prompt", e.prompt}, {"system", e.system}, {"text", e.text}};
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app);
  if (!out) fail(ErrorCode::kIo, "cannot append to " + path_.string());
  out << j.dump() << '\n';
  if (!out) fail(ErrorCode::kIo, "cannot append to " + path_.string());
  entries_[e.id] = e;
}

std::size_t GenerationCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

AbstractionMatrix collect_abstractions(const std::vector<TopicRecord>& topics,
                                       const AbstractionSources& src) {
  if (!src.judge || !src.explainer) fail(ErrorCode::kConfig, "judge and explainer are required");
  const int attempts = std::max(0, src.chunking.retries) + 1;
  auto score = [&](std::string_view kind, std::string_view subject) {
    const JudgePrompt p = render_judge_prompt(kind, subject);
    std::string last_error;
    for (int a = 0; a < attempts; ++a) {
      try {
        return static_cast<double>(parse_judge_response(src.judge(p.text, std::nullopt)).score);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kParse && e.code() != ErrorCode::kRange) throw;
        last_error = e.what();
      }
    }
    fail(ErrorCode::kProvider, "judge gave no usable score for " + std::string(kind) + ": " +
                                   last_error);
  };

  std::vector<InputVector> inputs(topics.size());
  std::vector<OutputVector> outputs(topics.size());
  std::vector<std::string> ids(topics.size());
  const std::optional<std::string_view> system =
      src.system_instruction.empty() ? std::nullopt
                                     : std::optional<std::string_view>(src.system_instruction);
  detail::parallel_for(topics.size(), src.jobs, [&](std::size_t i) {
    const TopicRecord& t = topics[i];
    ids[i] = t.id;
    for (std::size_t f = 0; f < kNumInputs; ++f) inputs[i][f] = score(kInputNames[f], t.text);

    const std::string prompt = render_explain_prompt(t.text, src.explain_template);
    std::string text;
    const auto cached = src.cache ? src.cache->find(t.id) : std::nullopt;
    if (cached && cached->prompt == prompt && cached->system == src.system_instruction) {
      text = cached->text;
    } else {
      text = src.explainer(prompt, system);
      if (src.cache) src.cache->store({t.id, prompt, src.system_instruction, text});
    }
    if (is_blank(text)) fail(ErrorCode::kProvider, "empty explanation for topic " + t.id);

    OutputVector& out = outputs[i];
    out[*output_index("gunning_fog")] = gunning_fog(text);
    out[*output_index("length_chars")] = static_cast<double>(text.size());
    out[*output_index("sentiment")] =
        chunk_and_aggregate(text, src.sentiment, ChunkMetric::kSentiment, src.chunking);
    out[*output_index("subjectivity")] =
        chunk_and_aggregate(text, src.subjectivity, ChunkMetric::kSubjectivity, src.chunking);
    for (const auto& o : kOutputPrompts) out[*output_index(o.kind)] = score(o.kind, text);
  });
  return AbstractionMatrix(std::move(ids), std::move(inputs), std::move(outputs));
}

}  // namespace ruleshap
