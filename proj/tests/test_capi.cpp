// Licensed under the Apache License 2.0 (see LICENSE file).

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "ruleshap/ruleshap.h"

namespace {

using nlohmann::json;

struct StringFree {
  void operator()(char* s) const { rs_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringFree>;

struct MatrixFree {
  void operator()(rs_matrix* m) const { rs_matrix_free(m); }
};
using Matrix = std::unique_ptr<rs_matrix, MatrixFree>;

struct SimulationFree {
  void operator()(rs_simulation* s) const { rs_simulation_free(s); }
};
using Sim = std::unique_ptr<rs_simulation, SimulationFree>;

std::string take(char* s) {
  OwnedString owned(s);
  return owned ? std::string(owned.get()) : std::string();
}

const char* kSmallSim = R"({"seed": 3, "population": {"n_per_cell": 4}, "biases": ["b1"]})";

struct Fixture : ::testing::Test {
  void SetUp() override {
    rs_simulation* raw = nullptr;
    ASSERT_EQ(rs_simulate(kSmallSim, &raw), RS_OK) << rs_last_error();
    sim.reset(raw);
    rs_matrix* m = nullptr;
    ASSERT_EQ(rs_simulation_matrix(sim.get(), &m), RS_OK);
    matrix.reset(m);
    char* t = nullptr;
    ASSERT_EQ(rs_simulation_truths(sim.get(), &t), RS_OK);
    truths = take(t);
  }
  Sim sim;
  Matrix matrix;
  std::string truths;
};

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STREQ(rs_version(), "1.0.0");
  EXPECT_STREQ(rs_status_name(RS_OK), "ok");
  EXPECT_STREQ(rs_status_name(RS_ERR_RANGE), "range");
  char* names = nullptr;
  ASSERT_EQ(rs_method_names(&names), RS_OK);
  EXPECT_EQ(json::parse(take(names)).size(), 6u);
}

TEST(CApi, ErrorsAreReportedPerCall) {
  rs_matrix* m = nullptr;
  EXPECT_EQ(rs_matrix_parse(nullptr, &m), RS_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(rs_last_error()), "");
  EXPECT_EQ(rs_matrix_parse("id,foo\n", &m), RS_ERR_SCHEMA);
  EXPECT_EQ(m, nullptr);
  EXPECT_EQ(rs_matrix_load("/nonexistent/x.csv", &m), RS_ERR_IO);
  double fog = 0;
  EXPECT_EQ(rs_gunning_fog("Go.", &fog), RS_OK);
  EXPECT_STREQ(rs_last_error(), "");
  EXPECT_DOUBLE_EQ(fog, 0.4);
  EXPECT_EQ(rs_matrix_rows(nullptr), 0u);
  rs_matrix_free(nullptr);
  rs_string_free(nullptr);
}

TEST_F(Fixture, MatrixRoundTrip) {
  EXPECT_EQ(rs_matrix_rows(matrix.get()), 2u * 11u * 5u * 4u);  // no collisions at this size
  char* csv = nullptr;
  ASSERT_EQ(rs_matrix_format(matrix.get(), &csv), RS_OK);
  const std::string text = take(csv);
  rs_matrix* back = nullptr;
  ASSERT_EQ(rs_matrix_parse(text.c_str(), &back), RS_OK);
  Matrix owned(back);
  char* again = nullptr;
  ASSERT_EQ(rs_matrix_format(back, &again), RS_OK);
  EXPECT_EQ(take(again), text);

  const auto dir = std::filesystem::temp_directory_path() / "ruleshap_capi";
  std::filesystem::create_directories(dir);
  ASSERT_EQ(rs_matrix_save(back, (dir / "m.csv").c_str()), RS_OK);
  ASSERT_EQ(rs_simulation_save_topics(sim.get(), (dir / "topics.csv").c_str()), RS_OK);
  rs_matrix* loaded = nullptr;
  ASSERT_EQ(rs_matrix_load((dir / "m.csv").c_str(), &loaded), RS_OK);
  Matrix l(loaded);
  EXPECT_EQ(rs_matrix_rows(loaded), rs_matrix_rows(matrix.get()));
  std::filesystem::remove_all(dir);
}

TEST_F(Fixture, ExplainAndEvaluate) {
  char* out = nullptr;
  ASSERT_EQ(rs_explain(matrix.get(), "ruleshap", "length_chars", R"({"seed": 1})", &out), RS_OK)
      << rs_last_error();
  const std::string set = take(out);
  const auto j = json::parse(set);
  EXPECT_EQ(j["method"], "ruleshap");
  ASSERT_FALSE(j["rules"].empty());

  EXPECT_EQ(rs_explain(matrix.get(), "nope", "length_chars", nullptr, &out), RS_ERR_CONFIG);
  EXPECT_NE(std::string(rs_last_error()).find("rulefit_xgb"), std::string::npos);
  EXPECT_EQ(rs_explain(matrix.get(), "ruleshap", "nope", nullptr, &out), RS_ERR_SCHEMA);
  EXPECT_EQ(rs_explain(matrix.get(), "ruleshap", "length_chars", R"({"bogus": 1})", &out),
            RS_ERR_CONFIG);

  const char* sets[] = {set.c_str()};
  const int ks[] = {1, 3};
  char* report = nullptr;
  char* table = nullptr;
  ASSERT_EQ(rs_evaluate(sets, 1, truths.c_str(), matrix.get(), ks, 2, &report, &table), RS_OK)
      << rs_last_error();
  const auto r = json::parse(take(report));
  EXPECT_EQ(r["methods"][0]["mrr"]["mrr@1"]["aggregate"], 1.0);
  EXPECT_FALSE(r["certificates"].empty());
  EXPECT_NE(take(table).find("MRR@3"), std::string::npos);
}

TEST_F(Fixture, AuditAndCertificates) {
  char* report = nullptr;
  char* table = nullptr;
  const char* options =
      R"({"methods": ["ruleshap", "decision_tree"], "targets": ["length_chars"], "k": [1, 10]})";
  ASSERT_EQ(rs_audit(matrix.get(), options, truths.c_str(), &report, &table), RS_OK)
      << rs_last_error();
  const auto r = json::parse(take(report));
  EXPECT_EQ(r["methods"].size(), 2u);
  EXPECT_EQ(r["k_values"], json({1, 10}));
  take(table);

  char* csv = nullptr;
  ASSERT_EQ(rs_certificates(matrix.get(), truths.c_str(), &csv), RS_OK);
  const std::string c = take(csv);
  EXPECT_NE(c.find("common,length_chars,"), std::string::npos);
  EXPECT_EQ(rs_audit(matrix.get(), R"({"k": [0]})", nullptr, &report, &table), RS_ERR_CONFIG);
}

TEST(CApi, TextHelpers) {
  char* prompt = nullptr;
  ASSERT_EQ(rs_render_judge_prompt("common", "Tea", &prompt), RS_OK);
  EXPECT_NE(take(prompt).find("about Tea."), std::string::npos);
  EXPECT_EQ(rs_render_judge_prompt("bogus", "Tea", &prompt), RS_ERR_SCHEMA);

  int score = 0;
  char* why = nullptr;
  ASSERT_EQ(rs_parse_judge_response("ES: 4\nSE: widely discussed", &score, &why), RS_OK);
  EXPECT_EQ(score, 4);
  EXPECT_EQ(take(why), "widely discussed");
  EXPECT_EQ(rs_parse_judge_response("ES: 9", &score, &why), RS_ERR_RANGE);
  EXPECT_EQ(rs_parse_judge_response("nothing", &score, &why), RS_ERR_PARSE);

  char* kept = nullptr;
  ASSERT_EQ(rs_dedup_topics(R"(["Tea", "tea", "Jazz"])", 0.9, &kept), RS_OK);
  EXPECT_EQ(json::parse(take(kept)), json({"Tea", "Jazz"}));
  EXPECT_EQ(rs_dedup_topics("{}", 0.9, &kept), RS_ERR_SCHEMA);
  EXPECT_EQ(rs_dedup_topics("[", 0.9, &kept), RS_ERR_PARSE);
}

TEST(CApi, AbstractNeedsCredential) {
  const auto dir = std::filesystem::temp_directory_path() / "ruleshap_capi_abstract";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "topics.csv") << "id,domain,text\n1,food,Tea\n";
  ::unsetenv("RULESHAP_CAPI_NO_KEY");
  const json provider = {{"endpoint", "http://127.0.0.1:9/v1/chat/completions"},
                         {"model", "m"},
                         {"api_key_env", "RULESHAP_CAPI_NO_KEY"},
                         {"retries", 0}};
  const json cfg = {{"judge", provider}, {"explainer", provider},
                    {"sentiment", provider}, {"subjectivity", provider}};
  rs_matrix* m = nullptr;
  EXPECT_EQ(rs_abstract((dir / "topics.csv").c_str(), cfg.dump().c_str(), &m), RS_ERR_CONFIG)
      << rs_last_error();
  EXPECT_EQ(m, nullptr);
  std::filesystem::remove_all(dir);
}

}  // namespace
