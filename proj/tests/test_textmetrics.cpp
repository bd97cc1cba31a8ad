// Licensed under the Apache License 2.0 (see LICENSE file).

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "ruleshap/textmetrics.hpp"
#include "test_util.hpp"

namespace ruleshap {
namespace {

using nlohmann::json;
using testing::throws_code;

TEST(GunningFog, HandCountedFixtures) {
  EXPECT_DOUBLE_EQ(gunning_fog("The cat sat. The cat ran."), 1.2);
  EXPECT_DOUBLE_EQ(gunning_fog("Go."), 0.4);
  // beau-ti-ful, de-ter-mi-na-tion, ev-e-ry-bo-dy, cel-e-brat-ing
  EXPECT_DOUBLE_EQ(gunning_fog("Beautiful determination everybody celebrating."), 41.6);
  EXPECT_TRUE(throws_code([] { gunning_fog("  ...  "); }, ErrorCode::kEmptyInput));
}

TEST(GunningFog, WhitespaceAndTrailingPunctuationInvariant) {
  const std::string base = "Photosynthesis converts light. Plants store energy in sugar";
  const double f = gunning_fog(base);
  EXPECT_DOUBLE_EQ(gunning_fog("  Photosynthesis   converts light.\n\nPlants  store energy in sugar "), f);
  EXPECT_DOUBLE_EQ(gunning_fog(base + "."), f);
  EXPECT_DOUBLE_EQ(gunning_fog(base + "!!!"), f);
}

TEST(Syllables, Heuristic) {
  EXPECT_EQ(estimate_syllables("cat"), 1);
  EXPECT_EQ(estimate_syllables("beautiful"), 3);
  EXPECT_EQ(estimate_syllables("jumped"), 1);
  EXPECT_EQ(estimate_syllables("boxes"), 1);
  EXPECT_EQ(estimate_syllables("complicated"), 3);
}

const std::vector<std::string>& all_kinds() {
  static const std::vector<std::string> kinds = [] {
    std::vector<std::string> k;
    for (auto n : kInputNames) k.emplace_back(n);
    k.insert(k.end(), {"framing_effect", "information_overload", "oversimplification"});
    return k;
  }();
  return kinds;
}

TEST(JudgePrompts, RenderEveryKind) {
  for (const auto& kind : all_kinds()) {
    ASSERT_TRUE(is_judge_kind(kind)) << kind;
    const auto p = render_judge_prompt(kind, "Renaissance art");
    EXPECT_FALSE(p.numbered_list);
    EXPECT_EQ(p.kind, kind);
    EXPECT_NE(p.text.find("Renaissance art"), std::string::npos);
    EXPECT_NE(p.text.find("ES: Estimated Score from 1 to 5."), std::string::npos);
    EXPECT_EQ(p.text.find('{'), std::string::npos) << kind;
    EXPECT_NE(p.text.find(std::string(judge_label(kind))), std::string::npos);
  }
  const auto in = render_judge_prompt("common", "Tea");
  EXPECT_EQ(in.text,
            "Evaluate how common the texts in the whole web are about Tea. Think about how "
            "frequently it appears or how widely it's understood.\n"
            "Rate your score on a scale from 1 (not common) to 5 (very common).\n"
            "Expected Output Structure:\n"
            "ES: Estimated Score from 1 to 5.\n"
            "SE: very Short Explanation of why you give the specific score.");
  const auto out = render_judge_prompt("framing_effect", "Tea is great.");
  EXPECT_NE(out.text.find("\n\nExplanation:\nTea is great.\n\n"), std::string::npos);
  EXPECT_NE(out.text.find("5 (a lot of framing effect)"), std::string::npos);
  EXPECT_EQ(judge_label("geo_variability"), "subject to geographical variability");
  EXPECT_TRUE(throws_code([] { render_judge_prompt("bogus", "x"); }, ErrorCode::kSchema));
  EXPECT_TRUE(throws_code([] { render_judge_prompt("common", "  "); }, ErrorCode::kEmptyInput));
}

TEST(JudgePrompts, TopicExtraction) {
  TopicExtractionRequest r;
  r.domain = "history";
  r.dimension = "technically complicated";
  r.score = 4;
  const auto p = render_topic_prompt(r);
  EXPECT_TRUE(p.numbered_list);
  EXPECT_NE(p.text.find("at least 60 distinct topics related to history"), std::string::npos);
  EXPECT_NE(p.text.find("1 (absolutely not technically complicated)"), std::string::npos);
  EXPECT_NE(p.text.find("why it's score 4;"), std::string::npos);
  EXPECT_EQ(render_explain_prompt("Tea"), "Explain Tea");
  const auto labels = parse_topic_list("Sure!\n1. Roman roads: widely studied;\n2. **Aqueducts**: x\n");
  EXPECT_EQ(labels, (std::vector<std::string>{"Roman roads", "Aqueducts"}));
}

TEST(JudgeResponses, Fixtures) {
  const auto s = parse_judge_response("ES: 4\nSE: widely discussed");
  EXPECT_EQ(s.score, 4);
  EXPECT_EQ(s.explanation, "widely discussed");
  EXPECT_TRUE(throws_code([] { parse_judge_response("ES: 7\nSE: x"); }, ErrorCode::kRange));
  EXPECT_TRUE(throws_code([] { parse_judge_response("no score here"); }, ErrorCode::kParse));
  EXPECT_EQ(parse_judge_response("**ES:** 2\n**SE:** short").score, 2);
}

// Synthetic judge replies to rendered prompts survive format -> parse.
TEST(JudgeResponses, RoundTripTwenty) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> score(1, 5);
  const std::vector<std::string> words = {"topic", "widely", "debated", "niche", "clear",
                                          "technical", "tone", "varies"};
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  for (int i = 0; i < 20; ++i) {
    const auto& kind = all_kinds()[i % all_kinds().size()];
    const auto prompt = render_judge_prompt(kind, "subject " + std::to_string(i));
    ASSERT_FALSE(prompt.text.empty());
    JudgeScore reply;
    reply.score = score(rng);
    for (int w = 0; w < 1 + i % 5; ++w) reply.explanation += (w ? " " : "") + words[pick(rng)];
    const auto back = parse_judge_response(format_judge_response(reply));
    EXPECT_EQ(back.score, reply.score);
    EXPECT_EQ(back.explanation, reply.explanation);
  }
}

TextProviderConfig chunking(int max_tokens, double chars_per_token = 4.0) {
  TextProviderConfig cfg;
  cfg.max_chunk_tokens = max_tokens;
  cfg.avg_chars_per_token = chars_per_token;
  cfg.backoff_ms = 0;
  return cfg;
}

// `length` characters of `c`, split into words by single spaces.
std::string words_of(char c, std::size_t length) {
  std::string s(length, c);
  for (std::size_t i = 4; i + 1 < length; i += 5) s[i] = ' ';
  return s;
}

TEST(Chunks, AggregationExamples) {
  const auto fixed = [](std::string label, double conf) {
    return [=](std::string_view) { return ChunkLabel{label, conf}; };
  };
  EXPECT_DOUBLE_EQ(chunk_and_aggregate("good", fixed("positive_4", 1.0), ChunkMetric::kSentiment,
                                       chunking(512)),
                   1.0);
  const auto by_letter = [](std::string_view chunk) {
    return chunk[0] == 'a' ? ChunkLabel{"positive_4", 1.0} : ChunkLabel{"negative_0", 1.0};
  };
  const std::string equal = words_of('a', 100) + " " + words_of('b', 100);
  EXPECT_DOUBLE_EQ(chunk_and_aggregate(equal, by_letter, ChunkMetric::kSentiment, chunking(25)), 0.0);

  const std::string text = words_of('a', 300) + " " + words_of('b', 100);
  const auto chunks = split_chunks(text, max_chunk_chars(chunking(75)));
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].size(), 300u);
  EXPECT_EQ(chunks[1].size(), 100u);
  EXPECT_DOUBLE_EQ(chunk_and_aggregate(text, by_letter, ChunkMetric::kSentiment, chunking(75)), 0.5);

  EXPECT_DOUBLE_EQ(chunk_and_aggregate("x", fixed("subjective_1", 0.8), ChunkMetric::kSubjectivity,
                                       chunking(512)),
                   0.8);
  EXPECT_NEAR(chunk_and_aggregate("x", fixed("objective_0", 0.8), ChunkMetric::kSubjectivity,
                                  chunking(512)),
              0.2, 1e-15);
  EXPECT_DOUBLE_EQ(chunk_and_aggregate("x", fixed("neutral_2", 1.0), ChunkMetric::kSentiment,
                                       chunking(512)),
                   0.0);
}

TEST(Chunks, SplitNeverExceedsBudget) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> len(1, 15);
  std::string text;
  for (int i = 0; i < 400; ++i) text += std::string(len(rng), 'x') + (i % 7 ? " " : "\n  ");
  for (std::size_t budget : {5u, 16u, 64u, 333u}) {
    std::string joined;
    for (const auto& c : split_chunks(text, budget)) {
      EXPECT_LE(c.size(), budget);
      EXPECT_FALSE(c.empty());
      joined += c;
    }
    std::string squeezed;
    for (char ch : text) {
      if (!std::isspace(static_cast<unsigned char>(ch))) squeezed += ch;
    }
    EXPECT_EQ(joined.size() - std::count(joined.begin(), joined.end(), ' ') -
                  std::count(joined.begin(), joined.end(), '\n'),
              squeezed.size());
  }
}

TEST(Chunks, RetriesThenProviderError) {
  int calls = 0;
  const ChunkScorer flaky = [&](std::string_view) {
    if (++calls < 3) fail(ErrorCode::kProvider, "temporary");
    return ChunkLabel{"positive_4", 1.0};
  };
  auto cfg = chunking(512);
  cfg.retries = 3;
  EXPECT_DOUBLE_EQ(chunk_and_aggregate("hello", flaky, ChunkMetric::kSentiment, cfg), 1.0);
  EXPECT_EQ(calls, 3);

  calls = 0;
  const ChunkScorer broken = [&](std::string_view) -> ChunkLabel {
    ++calls;
    fail(ErrorCode::kProvider, "down");
  };
  cfg.retries = 2;
  EXPECT_TRUE(throws_code([&] { chunk_and_aggregate("hello", broken, ChunkMetric::kSentiment, cfg); },
                          ErrorCode::kProvider));
  EXPECT_EQ(calls, 3);

  EXPECT_TRUE(throws_code(
      [&] { chunk_and_aggregate("hello", null_classifier("sentiment"), ChunkMetric::kSentiment, cfg); },
      ErrorCode::kConfig));
}

// Independent character-trigram cosine.
double oracle_trigram(const std::string& a, const std::string& b) {
  auto prep = [](const std::string& s) {
    std::string out = " ";
    bool space = true;
    for (char c : s) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!space) out += ' ';
        space = true;
      } else {
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        space = false;
      }
    }
    if (out.back() != ' ') out += ' ';
    std::map<std::string, double> counts;
    for (std::size_t i = 0; i + 3 <= out.size(); ++i) counts[out.substr(i, 3)] += 1;
    return counts;
  };
  const auto x = prep(a), y = prep(b);
  double dot = 0, nx = 0, ny = 0;
  for (const auto& [k, v] : x) {
    nx += v * v;
    if (auto it = y.find(k); it != y.end()) dot += v * it->second;
  }
  for (const auto& [k, v] : y) ny += v * v;
  return dot / std::sqrt(nx * ny);
}

TEST(Dedup, TrigramProvider) {
  const std::string a = "The French Revolution", b = "the  french revolution.";
  // Pinned by the oracle above.
  EXPECT_NEAR(oracle_trigram(a, b), 0.9304842103984708, 1e-15);
  EXPECT_NEAR(trigram_cosine(a, b), 0.9304842103984708, 1e-12);
  EXPECT_NEAR(trigram_cosine("Photosynthesis in plants", "Photosynthesis in green plants"),
              oracle_trigram("Photosynthesis in plants", "Photosynthesis in green plants"), 1e-12);
  EXPECT_EQ(trigram_cosine("Quantum entanglement", "Medieval trade routes"), 0.0);
  EXPECT_DOUBLE_EQ(trigram_cosine("Tea", "Tea"), 1.0);
}

TEST(Dedup, Fixtures) {
  EXPECT_EQ(dedup_topics({"Tea", "Tea"}), std::vector<std::string>{"Tea"});
  const std::vector<std::string> distinct = {"Quantum entanglement", "Medieval trade routes",
                                             "Jazz history"};
  EXPECT_EQ(dedup_topics(distinct), distinct);
  EXPECT_EQ(dedup_topics({"The French Revolution", "Jazz", "the  french revolution."}),
            (std::vector<std::string>{"The French Revolution", "Jazz"}));
  EXPECT_TRUE(throws_code([] { dedup_topics({"a"}, trigram_cosine, 0.0); }, ErrorCode::kRange));
}

TEST(Dedup, Idempotent) {
  std::mt19937_64 rng(10);
  const std::vector<std::string> stems = {"history of ", "the science of ", "modern ", "ancient "};
  const std::vector<std::string> nouns = {"rome", "jazz", "glaciers", "banking", "rockets", "tea"};
  std::uniform_int_distribution<std::size_t> s(0, stems.size() - 1), n(0, nouns.size() - 1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::string> topics;
    for (int i = 0; i < 25; ++i) topics.push_back(stems[s(rng)] + nouns[n(rng)] + (i % 3 ? "" : "s"));
    for (double threshold : {0.5, 0.8, 0.9, 1.0}) {
      const auto once = dedup_topics(topics, trigram_cosine, threshold);
      EXPECT_EQ(dedup_topics(once, trigram_cosine, threshold), once);
      for (std::size_t i = 0; i < once.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) EXPECT_LT(trigram_cosine(once[i], once[j]), threshold);
      }
    }
  }
}

// Local HTTP server standing in for the model endpoints.
class MockServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit MockServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post(".*", [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mutex_);
        bodies_.push_back(req.body);
        auth_.push_back(req.get_header_value("Authorization"));
      }
      ++hits_;
      handler_(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::string url(const std::string& path = "/v1/chat/completions") const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }
  int hits() const { return hits_; }
  std::vector<std::string> bodies() const {
    std::lock_guard lock(mutex_);
    return bodies_;
  }
  std::vector<std::string> auth() const {
    std::lock_guard lock(mutex_);
    return auth_;
  }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  mutable std::mutex mutex_;
  std::vector<std::string> bodies_;
  std::vector<std::string> auth_;
};

void reply_content(httplib::Response& res, const std::string& text) {
  const json j = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", text}}}}})}};
  res.set_content(j.dump(), "application/json");
}

TextProviderConfig provider(const MockServer& server, const std::string& key_env) {
  TextProviderConfig cfg;
  cfg.endpoint = server.url();
  cfg.model = "mock-model";
  cfg.api_key_env = key_env;
  cfg.backoff_ms = 1;
  cfg.timeout_seconds = 5;
  return cfg;
}

TEST(ChatClient, EchoesMockPayload) {
  ::setenv("RULESHAP_TEST_KEY", "secret", 1);
  MockServer server([](const httplib::Request&, httplib::Response& res) {
    reply_content(res, "mock payload");
  });
  EXPECT_EQ(llm_generate("hello", std::nullopt, provider(server, "RULESHAP_TEST_KEY")),
            "mock payload");
  EXPECT_EQ(server.auth().at(0), "Bearer secret");
}

TEST(ChatClient, MissingCredentialBeforeNetwork) {
  ::unsetenv("RULESHAP_TEST_ABSENT_KEY");
  MockServer server([](const httplib::Request&, httplib::Response& res) { reply_content(res, "x"); });
  EXPECT_TRUE(throws_code(
      [&] { llm_generate("hello", std::nullopt, provider(server, "RULESHAP_TEST_ABSENT_KEY")); },
      ErrorCode::kConfig));
  EXPECT_EQ(server.hits(), 0);
}

TEST(ChatClient, SystemMessageFirst) {
  ::setenv("RULESHAP_TEST_KEY", "secret", 1);
  MockServer server([](const httplib::Request& req, httplib::Response& res) {
    reply_content(res, json::parse(req.body)["messages"].back()["content"]);
  });
  auto cfg = provider(server, "RULESHAP_TEST_KEY");
  cfg.temperature = 0.0;
  cfg.top_p = 0.0;
  EXPECT_EQ(llm_generate("Explain Tea", "Be very positive.", cfg), "Explain Tea");
  const auto body = json::parse(server.bodies().at(0));
  ASSERT_EQ(body["messages"].size(), 2u);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][0]["content"], "Be very positive.");
  EXPECT_EQ(body["messages"][1]["role"], "user");
  EXPECT_EQ(body["model"], "mock-model");
  EXPECT_EQ(body["temperature"], 0.0);
  EXPECT_EQ(body["top_p"], 0.0);
  EXPECT_EQ(json::parse(chat_request_body("p", std::nullopt, cfg))["messages"].size(), 1u);
}

TEST(ChatClient, RetriesTransientFailures) {
  ::setenv("RULESHAP_TEST_KEY", "secret", 1);
  std::atomic<int> n{0};
  MockServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++n < 3) {
      res.status = n == 1 ? 503 : 429;
      return;
    }
    reply_content(res, "finally");
  });
  auto cfg = provider(server, "RULESHAP_TEST_KEY");
  cfg.retries = 3;
  EXPECT_EQ(llm_generate("x", std::nullopt, cfg), "finally");
  EXPECT_EQ(server.hits(), 3);
}

TEST(ChatClient, GivesUpWithProviderError) {
  ::setenv("RULESHAP_TEST_KEY", "secret", 1);
  MockServer always500([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  auto cfg = provider(always500, "RULESHAP_TEST_KEY");
  cfg.retries = 2;
  EXPECT_TRUE(throws_code([&] { llm_generate("x", std::nullopt, cfg); }, ErrorCode::kProvider));
  EXPECT_EQ(always500.hits(), 3);

  MockServer bad_request([](const httplib::Request&, httplib::Response& res) { res.status = 400; });
  cfg = provider(bad_request, "RULESHAP_TEST_KEY");
  EXPECT_TRUE(throws_code([&] { llm_generate("x", std::nullopt, cfg); }, ErrorCode::kProvider));
  EXPECT_EQ(bad_request.hits(), 1);

  MockServer garbage([](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"nothing\": 1}", "application/json");
  });
  cfg = provider(garbage, "RULESHAP_TEST_KEY");
  EXPECT_TRUE(throws_code([&] { llm_generate("x", std::nullopt, cfg); }, ErrorCode::kProvider));
}

TEST(Classifier, HttpLabelsAndNestedLists) {
  MockServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto text = json::parse(req.body).at("text").get<std::string>();
    if (text.rfind("nested", 0) == 0) {
      res.set_content(R"([[{"label":"negative_0","score":0.1},{"label":"positive_4","score":0.9}]])",
                      "application/json");
    } else {
      res.set_content(R"({"label":"subjective_1","score":0.7})", "application/json");
    }
  });
  TextProviderConfig cfg;
  cfg.endpoint = server.url("/classify");
  cfg.backoff_ms = 1;
  const auto scorer = http_classifier(cfg);
  const auto a = scorer("nested text");
  EXPECT_EQ(a.label, "positive_4");
  EXPECT_DOUBLE_EQ(a.confidence, 0.9);
  EXPECT_EQ(scorer("flat").label, "subjective_1");
  EXPECT_DOUBLE_EQ(chunk_and_aggregate("plain words", scorer, ChunkMetric::kSubjectivity, cfg), 0.7);
}

TEST(ProviderConfig, Validation) {
  TextProviderConfig cfg;
  cfg.max_chunk_tokens = 0;
  EXPECT_TRUE(throws_code([&] { cfg.validate(); }, ErrorCode::kConfig));
  cfg = {};
  cfg.temperature = -1;
  EXPECT_TRUE(throws_code([&] { cfg.validate(); }, ErrorCode::kConfig));
  EXPECT_EQ(max_chunk_chars(TextProviderConfig{}), 2048u);
}

TEST(Abstraction, CollectsAllColumnsAndCaches) {
  const auto dir = std::filesystem::temp_directory_path() / "ruleshap_test_abstract";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string explanation = "Tea is a drink. People enjoy it daily.";
  std::atomic<int> explained{0};
  AbstractionSources src;
  src.judge = [](std::string_view prompt, std::optional<std::string_view>) -> std::string {
    if (prompt.find("Explanation:") != std::string_view::npos) return "ES: 2\nSE: fine";
    if (prompt.find("positivity") != std::string_view::npos) return "ES: 5\nSE: upbeat";
    return "ES: 3\nSE: average";
  };
  src.explainer = [&](std::string_view prompt, std::optional<std::string_view> system) {
    ++explained;
    EXPECT_EQ(system.value_or(""), "Be brief.");
    EXPECT_EQ(prompt.substr(0, 8), "Explain ");
    return explanation;
  };
  src.sentiment = [](std::string_view) { return ChunkLabel{"positive_3", 1.0}; };
  src.subjectivity = [](std::string_view) { return ChunkLabel{"subjective_1", 0.6}; };
  src.system_instruction = "Be brief.";
  GenerationCache cache(dir / "cache.jsonl");
  src.cache = &cache;
  src.jobs = 2;
  const std::vector<TopicRecord> topics = {{"t1", "food", "Tea"}, {"t2", "food", "Coffee"}};
  const auto m = collect_abstractions(topics, src);
  ASSERT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.topic_ids(), (std::vector<std::string>{"t1", "t2"}));
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_EQ(m.inputs()[r][5], 5.0);
    EXPECT_EQ(m.inputs()[r][0], 3.0);
    EXPECT_DOUBLE_EQ(m.outputs()[r][0], gunning_fog(explanation));
    EXPECT_EQ(m.outputs()[r][1], static_cast<double>(explanation.size()));
    EXPECT_DOUBLE_EQ(m.outputs()[r][2], 0.5);
    EXPECT_DOUBLE_EQ(m.outputs()[r][3], 0.6);
    for (std::size_t c = 4; c < kNumOutputs; ++c) EXPECT_EQ(m.outputs()[r][c], 2.0);
  }
  EXPECT_EQ(explained, 2);
  EXPECT_EQ(cache.size(), 2u);

  GenerationCache reopened(dir / "cache.jsonl");
  EXPECT_EQ(reopened.size(), 2u);
  src.cache = &reopened;
  EXPECT_EQ(collect_abstractions(topics, src), m);
  EXPECT_EQ(explained, 2);
  std::filesystem::remove_all(dir);
}

TEST(Abstraction, JudgeFailuresSurface) {
  AbstractionSources src;
  src.judge = [](std::string_view, std::optional<std::string_view>) -> std::string {
    return "I refuse to score";
  };
  src.explainer = [](std::string_view, std::optional<std::string_view>) { return std::string("x"); };
  src.sentiment = null_classifier("sentiment");
  src.subjectivity = null_classifier("subjectivity");
  src.chunking.retries = 1;
  src.chunking.backoff_ms = 0;
  const std::vector<TopicRecord> topics = {{"t1", "food", "Tea"}};
  try {
    collect_abstractions(topics, src);
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::kParse || e.code() == ErrorCode::kProvider)
        << error_code_name(e.code());
  }
}

}  // namespace
}  // namespace ruleshap
