// Licensed under the Apache License 2.0 (see LICENSE file).
//
// Topic tables and the ordinal abstraction matrix: 11 judged input
// properties per topic (Likert 1..5) and 7 measured output properties of the
// explanation produced for that topic.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ruleshap {

inline constexpr std::size_t kNumInputs = 11;
inline constexpr std::size_t kNumOutputs = 7;
inline constexpr int kScoreMin = 1;
inline constexpr int kScoreMax = 5;

inline constexpr std::array<std::string_view, kNumInputs> kInputNames = {
    "conceptually_dense", "technically_complicated", "common",
    "socially_controversial", "unambiguous", "positive",
    "negative", "neutral", "geo_variability",
    "interdisciplinary", "time_variability"};

inline constexpr std::array<std::string_view, kNumOutputs> kOutputNames = {
    "gunning_fog",    "length_chars",         "sentiment",         "subjectivity",
    "framing_effect", "information_overload", "oversimplification"};

using InputVector = std::array<double, kNumInputs>;
using OutputVector = std::array<double, kNumOutputs>;

// Index lookups; nullopt for unknown names.
std::optional<std::size_t> input_index(std::string_view name);
std::optional<std::size_t> output_index(std::string_view name);
// Throwing variants (schema error naming the feature).
std::size_t require_input_index(std::string_view name);
std::size_t require_output_index(std::string_view name);

// True for the four metric columns computed from text rather than judged.
bool is_proxy_output(std::size_t output);

struct TopicRecord {
  std::string id;
  std::string domain;
  std::string text;

  bool operator==(const TopicRecord&) const = default;
};

std::vector<TopicRecord> load_topics(const std::filesystem::path& path);
void save_topics(const std::vector<TopicRecord>& topics, const std::filesystem::path& path);

// Immutable after construction; the constructor validates every invariant.
class AbstractionMatrix {
 public:
  AbstractionMatrix() = default;
  AbstractionMatrix(std::vector<std::string> topic_ids, std::vector<InputVector> inputs,
                    std::vector<OutputVector> outputs);

  std::size_t rows() const noexcept { return inputs_.size(); }
  bool empty() const noexcept { return inputs_.empty(); }

  const std::vector<std::string>& topic_ids() const noexcept { return topic_ids_; }
  const std::vector<InputVector>& inputs() const noexcept { return inputs_; }
  const std::vector<OutputVector>& outputs() const noexcept { return outputs_; }

  std::vector<double> input_column(std::size_t feature) const;
  std::vector<double> output_column(std::size_t target) const;

  bool operator==(const AbstractionMatrix&) const = default;

 private:
  std::vector<std::string> topic_ids_;
  std::vector<InputVector> inputs_;
  std::vector<OutputVector> outputs_;
};

AbstractionMatrix load_abstraction_matrix(const std::filesystem::path& path);
AbstractionMatrix parse_abstraction_matrix(std::string_view csv_text);
void save_abstraction_matrix(const AbstractionMatrix& m, const std::filesystem::path& path);
std::string format_abstraction_matrix(const AbstractionMatrix& m);

// Shortest round-trip decimal representation.
std::string format_double(double value);

struct BackgroundVector {
  InputVector values{};
};

BackgroundVector background_of(const AbstractionMatrix& m);

// Grid-aware nearest neighbour search over the input rows of a matrix.
// Tie sets (all rows within 1e-9 of the minimal Euclidean distance) are
// memoised per query for on-grid queries; lookups are thread-safe.
class NearestIndex {
 public:
  explicit NearestIndex(const AbstractionMatrix& m);
  ~NearestIndex();
  NearestIndex(const NearestIndex&) = delete;
  NearestIndex& operator=(const NearestIndex&) = delete;

  std::size_t rows() const noexcept { return rows_; }

  // Row indices at minimal distance, ascending.
  std::vector<std::uint32_t> tie_set(std::span<const double> query) const;

 private:
  std::vector<std::uint32_t> scan(std::span<const double> query) const;

  std::size_t rows_ = 0;
  // Column-major copy of the distinct input rows, and the matrix rows
  // behind each of them.
  std::vector<std::vector<std::uint8_t>> columns_;
  std::vector<std::vector<std::uint32_t>> members_;
  struct Cache;
  std::unique_ptr<Cache> cache_;
};

// Among rows at minimal distance from `query`, picks one uniformly with a
// generator seeded by `seed`.
std::size_t nearest_datapoint(const AbstractionMatrix& m, std::span<const double> query,
                              std::uint64_t seed);

}  // namespace ruleshap
