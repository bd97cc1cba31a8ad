// Licensed under the Apache License 2.0 (see LICENSE file).

#include "ruleshap/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <unordered_map>

#if defined(__x86_64__) && defined(__GNUC__)
#include <immintrin.h>
#endif

#include "csv.hpp"
#include "ruleshap/error.hpp"

namespace ruleshap {

namespace {

constexpr double kTieTolerance = 1e-9;

template <std::size_t N>
std::optional<std::size_t> find_name(const std::array<std::string_view, N>& names,
                                     std::string_view name) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

double parse_double_cell(const std::string& cell, std::size_t line, const char* column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  while (begin < end && *begin == ' ') ++begin;
  while (end > begin && end[-1] == ' ') --end;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || begin == end) {
    fail(ErrorCode::kParse, "line " + std::to_string(line) + ": column '" + column +
                                "' is not a number: '" + cell + "'");
  }
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << contents;
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

std::uint32_t grid_key(std::span<const double> query, bool& on_grid) {
  std::uint32_t key = 0;
  on_grid = true;
  for (double v : query) {
    if (v < kScoreMin || v > kScoreMax || v != std::floor(v)) {
      on_grid = false;
      return 0;
    }
    key = key * 5 + static_cast<std::uint32_t>(v - kScoreMin);
  }
  return key;
}

}  // namespace

std::optional<std::size_t> input_index(std::string_view name) {
  return find_name(kInputNames, name);
}

std::optional<std::size_t> output_index(std::string_view name) {
  return find_name(kOutputNames, name);
}

std::size_t require_input_index(std::string_view name) {
  auto idx = input_index(name);
  if (!idx) fail(ErrorCode::kSchema, "unknown input feature '" + std::string(name) + "'");
  return *idx;
}

std::size_t require_output_index(std::string_view name) {
  auto idx = output_index(name);
  if (!idx) fail(ErrorCode::kSchema, "unknown output feature '" + std::string(name) + "'");
  return *idx;
}

bool is_proxy_output(std::size_t output) { return output < 4; }

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) fail(ErrorCode::kInvalidArgument, "cannot format number");
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// Topics

std::vector<TopicRecord> load_topics(const std::filesystem::path& path) {
  const auto rows = csv::parse(read_file(path));
  if (rows.empty()) fail(ErrorCode::kSchema, "topic file has no header");
  const auto& header = rows.front();
  const std::vector<std::string> expected = {"id", "domain", "text"};
  if (header.size() != expected.size()) {
    fail(ErrorCode::kSchema, "topic header must be 'id,domain,text'");
  }
  for (std::size_t c = 0; c < expected.size(); ++c) {
    if (header[c] != expected[c]) {
      fail(ErrorCode::kSchema, "missing column '" + expected[c] + "'");
    }
  }
  std::vector<TopicRecord> topics;
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 3) {
      fail(ErrorCode::kParse, "line " + std::to_string(r + 1) + ": expected 3 fields");
    }
    if (row[2].empty()) fail(ErrorCode::kParse, "topic '" + row[0] + "' has empty text");
    if (!seen.emplace(row[0], r).second) {
      fail(ErrorCode::kSchema, "duplicate topic id '" + row[0] + "'");
    }
    topics.push_back({row[0], row[1], row[2]});
  }
  return topics;
}

void save_topics(const std::vector<TopicRecord>& topics, const std::filesystem::path& path) {
  std::string out = "id,domain,text\n";
  for (const auto& t : topics) {
    out += csv::escape(t.id) + "," + csv::escape(t.domain) + "," + csv::escape(t.text) + "\n";
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// AbstractionMatrix

AbstractionMatrix::AbstractionMatrix(std::vector<std::string> topic_ids,
                                     std::vector<InputVector> inputs,
                                     std::vector<OutputVector> outputs)
    : topic_ids_(std::move(topic_ids)), inputs_(std::move(inputs)), outputs_(std::move(outputs)) {
  if (inputs_.size() != outputs_.size() || inputs_.size() != topic_ids_.size()) {
    fail(ErrorCode::kDimension, "row counts of ids, inputs and outputs differ");
  }
  for (std::size_t r = 0; r < inputs_.size(); ++r) {
    for (std::size_t c = 0; c < kNumInputs; ++c) {
      const double v = inputs_[r][c];
      if (!(v >= kScoreMin && v <= kScoreMax) || v != std::floor(v)) {
        fail(ErrorCode::kRange, "row '" + topic_ids_[r] + "': input '" +
                                    std::string(kInputNames[c]) + "' = " + format_double(v) +
                                    " is not an integer score in 1..5");
      }
    }
    for (std::size_t c = 0; c < kNumOutputs; ++c) {
      if (!std::isfinite(outputs_[r][c])) {
        fail(ErrorCode::kParse, "row '" + topic_ids_[r] + "': output '" +
                                    std::string(kOutputNames[c]) + "' is not finite");
      }
    }
  }
}

std::vector<double> AbstractionMatrix::input_column(std::size_t feature) const {
  std::vector<double> col(rows());
  for (std::size_t r = 0; r < rows(); ++r) col[r] = inputs_[r].at(feature);
  return col;
}

std::vector<double> AbstractionMatrix::output_column(std::size_t target) const {
  std::vector<double> col(rows());
  for (std::size_t r = 0; r < rows(); ++r) col[r] = outputs_[r].at(target);
  return col;
}

AbstractionMatrix parse_abstraction_matrix(std::string_view csv_text) {
  const auto rows = csv::parse(csv_text);
  if (rows.empty()) fail(ErrorCode::kSchema, "matrix file has no header");
  const auto& header = rows.front();

  std::vector<std::string> expected;
  expected.emplace_back("id");
  for (auto n : kInputNames) expected.emplace_back(n);
  for (auto n : kOutputNames) expected.emplace_back(n);
  for (std::size_t c = 0; c < expected.size(); ++c) {
    if (c >= header.size() || header[c] != expected[c]) {
      fail(ErrorCode::kSchema, "missing column '" + expected[c] + "' at position " +
                                   std::to_string(c + 1));
    }
  }
  if (header.size() != expected.size()) {
    fail(ErrorCode::kSchema, "unexpected extra column '" + header[expected.size()] + "'");
  }

  std::vector<std::string> ids;
  std::vector<InputVector> inputs;
  std::vector<OutputVector> outputs;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t line = r + 1;
    if (row.size() != expected.size()) {
      fail(ErrorCode::kParse, "line " + std::to_string(line) + ": expected " +
                                  std::to_string(expected.size()) + " fields, got " +
                                  std::to_string(row.size()));
    }
    InputVector in{};
    for (std::size_t c = 0; c < kNumInputs; ++c) {
      const double v = parse_double_cell(row[1 + c], line, kInputNames[c].data());
      if (!(v >= kScoreMin && v <= kScoreMax) || v != std::floor(v)) {
        fail(ErrorCode::kRange, "row '" + row[0] + "' (line " + std::to_string(line) +
                                    "): input '" + std::string(kInputNames[c]) + "' = '" +
                                    row[1 + c] + "' outside 1..5");
      }
      in[c] = v;
    }
    OutputVector out{};
    for (std::size_t c = 0; c < kNumOutputs; ++c) {
      const double v =
          parse_double_cell(row[1 + kNumInputs + c], line, kOutputNames[c].data());
      if (!std::isfinite(v)) {
        fail(ErrorCode::kParse, "row '" + row[0] + "': output '" +
                                    std::string(kOutputNames[c]) + "' is not finite");
      }
      out[c] = v;
    }
    ids.push_back(row[0]);
    inputs.push_back(in);
    outputs.push_back(out);
  }
  return AbstractionMatrix(std::move(ids), std::move(inputs), std::move(outputs));
}

AbstractionMatrix load_abstraction_matrix(const std::filesystem::path& path) {
  return parse_abstraction_matrix(read_file(path));
}

std::string format_abstraction_matrix(const AbstractionMatrix& m) {
  std::string out = "id";
  for (auto n : kInputNames) (out += ',') += n;
  for (auto n : kOutputNames) (out += ',') += n;
  out += '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out += csv::escape(m.topic_ids()[r]);
    for (double v : m.inputs()[r]) (out += ',') += format_double(v);
    for (double v : m.outputs()[r]) (out += ',') += format_double(v);
    out += '\n';
  }
  return out;
}

void save_abstraction_matrix(const AbstractionMatrix& m, const std::filesystem::path& path) {
  write_file(path, format_abstraction_matrix(m));
}

BackgroundVector background_of(const AbstractionMatrix& m) {
  if (m.empty()) fail(ErrorCode::kEmptyInput, "background of an empty matrix");
  BackgroundVector bg;
  bg.values = m.inputs().front();
  for (const auto& row : m.inputs()) {
    for (std::size_t c = 0; c < kNumInputs; ++c) bg.values[c] = std::min(bg.values[c], row[c]);
  }
  return bg;
}

// ---------------------------------------------------------------------------
// Nearest datapoint

struct NearestIndex::Cache {
  mutable std::shared_mutex mutex;
  std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> ties;
};

NearestIndex::NearestIndex(const AbstractionMatrix& m)
    : rows_(m.rows()), columns_(kNumInputs), cache_(std::make_unique<Cache>()) {
  if (m.empty()) fail(ErrorCode::kEmptyInput, "nearest-neighbour index over an empty matrix");
  // Duplicate rows share one slot; a tie on a slot covers all of its rows.
  std::map<InputVector, std::uint32_t> slot_of;
  for (std::size_t r = 0; r < rows_; ++r) {
    const auto [it, fresh] =
        slot_of.emplace(m.inputs()[r], static_cast<std::uint32_t>(members_.size()));
    if (fresh) {
      members_.emplace_back();
      for (std::size_t c = 0; c < kNumInputs; ++c) {
        columns_[c].push_back(static_cast<std::uint8_t>(m.inputs()[r][c]));
      }
    }
    members_[it->second].push_back(static_cast<std::uint32_t>(r));
  }
}

NearestIndex::~NearestIndex() = default;

namespace {

// Squared distances are at most 11 * 16 = 176, so bytes suffice. `dist`
// holds one entry per (padded) slot; returns the slots at minimal distance.
std::vector<std::uint32_t> grid_ties_scalar(const std::vector<std::vector<std::uint8_t>>& columns,
                                            const std::uint8_t* query, std::uint8_t* dist,
                                            std::size_t n) {
  std::fill(dist, dist + n, std::uint8_t{0});
  for (std::size_t c = 0; c < kNumInputs; ++c) {
    const std::uint8_t q = query[c];
    const std::uint8_t* col = columns[c].data();
    for (std::size_t r = 0; r < n; ++r) {
      const std::uint8_t d = col[r] > q ? col[r] - q : q - col[r];
      dist[r] = static_cast<std::uint8_t>(dist[r] + d * d);
    }
  }
  const std::uint8_t best = *std::min_element(dist, dist + n);
  std::vector<std::uint32_t> out;
  for (std::size_t r = 0; r < n; ++r) {
    if (dist[r] == best) out.push_back(static_cast<std::uint32_t>(r));
  }
  return out;
}

#if defined(__x86_64__) && defined(__GNUC__)
[[gnu::target("avx2")]] std::vector<std::uint32_t> grid_ties_avx2(
    const std::vector<std::vector<std::uint8_t>>& columns, const std::uint8_t* query,
    std::uint8_t* dist, std::size_t n) {
  const __m256i squares =
      _mm256_setr_epi8(0, 1, 4, 9, 16, 25, 36, 49, 64, 81, 100, 121, (char)144, (char)169,
                       (char)196, (char)225, 0, 1, 4, 9, 16, 25, 36, 49, 64, 81, 100, 121,
                       (char)144, (char)169, (char)196, (char)225);
  __m256i q[kNumInputs];
  for (std::size_t c = 0; c < kNumInputs; ++c) q[c] = _mm256_set1_epi8(static_cast<char>(query[c]));
  const std::size_t blocks = n / 32;
  __m256i low = _mm256_set1_epi8(static_cast<char>(0xFF));
  for (std::size_t b = 0; b < blocks; ++b) {
    __m256i acc = _mm256_setzero_si256();
    for (std::size_t c = 0; c < kNumInputs; ++c) {
      const __m256i v =
          _mm256_loadu_si256(reinterpret_cast<const __m256i*>(columns[c].data() + 32 * b));
      const __m256i d = _mm256_sub_epi8(_mm256_max_epu8(v, q[c]), _mm256_min_epu8(v, q[c]));
      acc = _mm256_add_epi8(acc, _mm256_shuffle_epi8(squares, d));
    }
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(dist + 32 * b), acc);
    low = _mm256_min_epu8(low, acc);
  }
  alignas(32) std::uint8_t lanes[32];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), low);
  std::uint8_t best = *std::min_element(lanes, lanes + 32);
  for (std::size_t r = blocks * 32; r < n; ++r) {
    std::uint8_t acc = 0;
    for (std::size_t c = 0; c < kNumInputs; ++c) {
      const std::uint8_t v = columns[c][r];
      const std::uint8_t d = v > query[c] ? v - query[c] : query[c] - v;
      acc = static_cast<std::uint8_t>(acc + d * d);
    }
    dist[r] = acc;
    best = std::min(best, acc);
  }
  std::vector<std::uint32_t> out;
  const __m256i target = _mm256_set1_epi8(static_cast<char>(best));
  for (std::size_t b = 0; b < blocks; ++b) {
    const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(dist + 32 * b));
    auto mask = static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(v, target)));
    while (mask) {
      out.push_back(static_cast<std::uint32_t>(32 * b + std::countr_zero(mask)));
      mask &= mask - 1;
    }
  }
  for (std::size_t r = blocks * 32; r < n; ++r) {
    if (dist[r] == best) out.push_back(static_cast<std::uint32_t>(r));
  }
  return out;
}
#endif

std::vector<std::uint32_t> grid_ties(const std::vector<std::vector<std::uint8_t>>& columns,
                                     const std::uint8_t* query, std::uint8_t* dist,
                                     std::size_t n) {
#if defined(__x86_64__) && defined(__GNUC__)
  static const bool avx2 = __builtin_cpu_supports("avx2");
  if (avx2) return grid_ties_avx2(columns, query, dist, n);
#endif
  return grid_ties_scalar(columns, query, dist, n);
}

}  // namespace

std::vector<std::uint32_t> NearestIndex::scan(std::span<const double> query) const {
  bool on_grid = false;
  grid_key(query, on_grid);
  const std::size_t slots = members_.size();
  std::vector<std::uint32_t> best_slots;
  if (on_grid) {
    std::array<std::uint8_t, kNumInputs> q{};
    for (std::size_t c = 0; c < kNumInputs; ++c) q[c] = static_cast<std::uint8_t>(query[c]);
    std::vector<std::uint8_t> dist(slots);
    best_slots = grid_ties(columns_, q.data(), dist.data(), slots);
  } else {
    std::vector<double> dist(slots, 0.0);
    for (std::size_t c = 0; c < kNumInputs; ++c) {
      const std::uint8_t* col = columns_[c].data();
      for (std::size_t s = 0; s < slots; ++s) {
        const double d = static_cast<double>(col[s]) - query[c];
        dist[s] += d * d;
      }
    }
    double best = std::numeric_limits<double>::infinity();
    for (double d : dist) best = std::min(best, std::sqrt(d));
    for (std::size_t s = 0; s < slots; ++s) {
      if (std::sqrt(dist[s]) - best <= kTieTolerance) {
        best_slots.push_back(static_cast<std::uint32_t>(s));
      }
    }
  }
  std::vector<std::uint32_t> ties;
  for (std::uint32_t s : best_slots) {
    ties.insert(ties.end(), members_[s].begin(), members_[s].end());
  }
  std::sort(ties.begin(), ties.end());
  return ties;
}

std::vector<std::uint32_t> NearestIndex::tie_set(std::span<const double> query) const {
  if (query.size() != kNumInputs) {
    fail(ErrorCode::kDimension, "query has " + std::to_string(query.size()) +
                                    " components, expected 11");
  }
  bool on_grid = false;
  const std::uint32_t key = grid_key(query, on_grid);
  if (!on_grid) return scan(query);
  {
    std::shared_lock lock(cache_->mutex);
    if (auto it = cache_->ties.find(key); it != cache_->ties.end()) return it->second;
  }
  auto ties = scan(query);
  std::unique_lock lock(cache_->mutex);
  return cache_->ties.emplace(key, std::move(ties)).first->second;
}

std::size_t nearest_datapoint(const AbstractionMatrix& m, std::span<const double> query,
                              std::uint64_t seed) {
  if (query.size() != kNumInputs) {
    fail(ErrorCode::kDimension, "query has " + std::to_string(query.size()) +
                                    " components, expected 11");
  }
  if (m.empty()) fail(ErrorCode::kEmptyInput, "nearest datapoint in an empty matrix");
  std::vector<double> dist(m.rows());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < kNumInputs; ++c) {
      const double d = m.inputs()[r][c] - query[c];
      s += d * d;
    }
    dist[r] = std::sqrt(s);
    best = std::min(best, dist[r]);
  }
  std::vector<std::size_t> ties;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (dist[r] - best <= kTieTolerance) ties.push_back(r);
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
  return ties[pick(rng)];
}

}  // namespace ruleshap
