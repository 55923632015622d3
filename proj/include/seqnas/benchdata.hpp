#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seqnas/avec.hpp"
#include "seqnas/evaluators.hpp"
#include "seqnas/records.hpp"
#include "seqnas/search_space.hpp"

namespace seqnas {

enum class BenchMethod { ours, random };

std::string_view to_string(BenchMethod m);
BenchMethod parse_bench_method(std::string_view s);

struct BenchRecord {
    std::string dataset;
    BenchMethod method = BenchMethod::ours;
    std::optional<ArchitectureSpec> spec;
    std::vector<int> avec;
    double best_score = 0.0;
    std::string metric_name = "unknown";

    bool operator==(const BenchRecord&) const = default;
};

struct BenchHeader {
    std::string layout_fp;
    std::size_t layout_len = 0;
    std::vector<std::string> fields;
};

inline constexpr const char* kBenchFormat = "seqnas-bench";
inline constexpr int kBenchVersion = 1;

// Header line, then one JSON record per line. Throws FormatError when the
// records do not share the layout of cfg or a spec disagrees with its avec.
void write_bench(const std::filesystem::path& path, std::span<const BenchRecord> records,
                 const SearchSpaceConfig& cfg);

// Structural read; malformed lines are reported with their 1-based line number.
std::vector<BenchRecord> read_bench(const std::filesystem::path& path, BenchHeader* header = nullptr);

// Fills absent specs by decoding avec and checks encode(spec) == avec.
void resolve_specs(std::vector<BenchRecord>& records, const SearchSpaceConfig& cfg);

enum class ImportFormat { bench_jsonl, csv };
ImportFormat parse_import_format(std::string_view s);

// Third-party adapters. CSV columns: dataset,method,best_score,avec[,metric_name]
// with avec written as a 0/1 string. Missing metric names become "unknown".
std::vector<BenchRecord> import_bench(const std::filesystem::path& path, ImportFormat format,
                                      const SearchSpaceConfig& cfg);

std::vector<BenchRecord> export_records(std::span<const TrainedRecord> records, const std::string& dataset,
                                        BenchMethod method);

struct HistogramBin {
    double lower = 0.0;
    std::size_t count = 0;
};

// Equal-width bins over [min, max], rightmost bin closed. A zero-width range
// yields a single bin holding everything.
std::vector<HistogramBin> histogram(std::span<const double> scores, std::size_t bins);
std::vector<HistogramBin> histogram(std::span<const BenchRecord> records, std::size_t bins);

struct SurrogateDataset {
    std::vector<FeatureVector> features;
    std::vector<double> scores;
};

SurrogateDataset to_surrogate_dataset(std::span<const BenchRecord> records, const std::string& layout_fp = {});

// (dataset, method) -> record count.
std::map<std::pair<std::string, BenchMethod>, std::size_t> partition_counts(std::span<const BenchRecord> records);

// Lookup table keyed by arch id; first occurrence wins for repeated
// architectures. An empty dataset filter keeps every record.
std::map<ArchId, BenchEntry> lookup_table(std::span<const BenchRecord> records, const SearchSpaceConfig& cfg,
                                          const std::string& dataset = {});

}  // namespace seqnas
