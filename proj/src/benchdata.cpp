#include "seqnas/benchdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "seqnas/errors.hpp"
#include "seqnas/json_io.hpp"

namespace seqnas {

namespace fs = std::filesystem;

std::string_view to_string(BenchMethod m)
{
    return m == BenchMethod::ours ? "ours" : "random";
}

BenchMethod parse_bench_method(std::string_view s)
{
    if (s == "ours") return BenchMethod::ours;
    if (s == "random") return BenchMethod::random;
    throw FormatError("unknown bench method '" + std::string(s) + "'");
}

ImportFormat parse_import_format(std::string_view s)
{
    if (s == "jsonl" || s == "bench") return ImportFormat::bench_jsonl;
    if (s == "csv") return ImportFormat::csv;
    throw ConfigError("unknown import format '" + std::string(s) + "' (expected jsonl or csv)");
}

namespace {

const std::vector<std::string>& bench_fields()
{
    static const std::vector<std::string> fields{"dataset", "method", "spec", "avec", "best_score", "metric_name"};
    return fields;
}

FeatureVector to_feature_vector(const std::vector<int>& avec, const std::string& fp)
{
    FeatureVector v;
    v.layout_fp = fp;
    v.bits.reserve(avec.size());
    for (int b : avec) {
        if (b != 0 && b != 1)
            throw FormatError("avec entries must be 0 or 1");
        v.bits.push_back(static_cast<std::uint8_t>(b));
    }
    return v;
}

std::vector<int> to_int_vector(const FeatureVector& v)
{
    return std::vector<int>(v.bits.begin(), v.bits.end());
}

json record_to_json(const BenchRecord& r)
{
    json j{{"dataset", r.dataset},
           {"method", to_string(r.method)},
           {"avec", r.avec},
           {"best_score", r.best_score},
           {"metric_name", r.metric_name}};
    if (r.spec)
        j["spec"] = *r.spec;
    return j;
}

BenchRecord record_from_json(const json& j)
{
    BenchRecord r;
    r.dataset = j.at("dataset").get<std::string>();
    r.method = parse_bench_method(j.at("method").get<std::string>());
    r.avec = j.at("avec").get<std::vector<int>>();
    for (int b : r.avec)
        if (b != 0 && b != 1)
            throw FormatError("avec entries must be 0 or 1");
    r.best_score = j.at("best_score").get<double>();
    if (!std::isfinite(r.best_score))
        throw FormatError("best_score must be finite");
    if (auto it = j.find("metric_name"); it != j.end() && !it->is_null())
        r.metric_name = it->get<std::string>();
    if (auto it = j.find("spec"); it != j.end() && !it->is_null())
        r.spec = it->get<ArchitectureSpec>();
    return r;
}

}  // namespace

void write_bench(const fs::path& path, std::span<const BenchRecord> records, const SearchSpaceConfig& cfg)
{
    const FeatureLayout layout = feature_layout(cfg);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.avec.size() != layout.size())
            throw FormatError("record " + std::to_string(i) + " avec length " + std::to_string(r.avec.size()) +
                              " differs from layout length " + std::to_string(layout.size()));
        if (r.spec && to_int_vector(encode(*r.spec, cfg)) != r.avec)
            throw FormatError("record " + std::to_string(i) + " spec does not encode to its avec");
    }

    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw FormatError("cannot write bench file " + path.string());
    const json header{{"format", kBenchFormat},
                      {"version", kBenchVersion},
                      {"layout_fp", layout.fingerprint},
                      {"layout_len", layout.size()},
                      {"fields", bench_fields()}};
    out << header.dump() << '\n';
    for (const auto& r : records)
        out << record_to_json(r).dump() << '\n';
    if (!out)
        throw FormatError("failed writing bench file " + path.string());
}

std::vector<BenchRecord> read_bench(const fs::path& path, BenchHeader* header_out)
{
    std::ifstream in(path);
    if (!in)
        throw FormatError("cannot open bench file " + path.string());

    std::string line;
    std::size_t line_no = 0;
    BenchHeader header;
    bool have_header = false;
    std::vector<BenchRecord> records;
    const auto where = [&] { return path.string() + ":" + std::to_string(line_no) + ": "; };

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            throw FormatError(where() + "malformed JSON");
        }
        try {
            if (!have_header) {
                if (j.value("format", "") != kBenchFormat)
                    throw FormatError(where() + "missing seqnas-bench header");
                if (j.at("version").get<int>() != kBenchVersion)
                    throw FormatError(where() + "unsupported bench version");
                header.layout_fp = j.at("layout_fp").get<std::string>();
                header.layout_len = j.at("layout_len").get<std::size_t>();
                header.fields = j.at("fields").get<std::vector<std::string>>();
                have_header = true;
                continue;
            }
            BenchRecord r = record_from_json(j);
            if (r.avec.size() != header.layout_len)
                throw FormatError(where() + "avec length " + std::to_string(r.avec.size()) +
                                  " differs from header layout_len " + std::to_string(header.layout_len));
            records.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw FormatError(where() + e.what());
        } catch (const FormatError& e) {
            const std::string msg = e.what();
            throw FormatError(msg.rfind(path.string(), 0) == 0 ? msg : where() + msg);
        }
    }
    if (!have_header)
        throw FormatError(path.string() + ": empty bench file (no header line)");
    if (header_out)
        *header_out = header;
    return records;
}

void resolve_specs(std::vector<BenchRecord>& records, const SearchSpaceConfig& cfg)
{
    const FeatureLayout layout = feature_layout(cfg);
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& r = records[i];
        const FeatureVector v = to_feature_vector(r.avec, layout.fingerprint);
        try {
            if (!r.spec)
                r.spec = decode(v, cfg);
            else if (encode(*r.spec, cfg) != v)
                throw FormatError("spec does not encode to its avec");
        } catch (const Error& e) {
            throw FormatError("record " + std::to_string(i) + ": " + e.what());
        }
    }
}

std::vector<BenchRecord> import_bench(const fs::path& path, ImportFormat format, const SearchSpaceConfig& cfg)
{
    std::vector<BenchRecord> records;
    if (format == ImportFormat::bench_jsonl) {
        BenchHeader header;
        records = read_bench(path, &header);
        if (header.layout_len != feature_layout(cfg).size())
            throw FormatError("bench layout length does not match the search space");
    } else {
        std::ifstream in(path);
        if (!in)
            throw FormatError("cannot open " + path.string());
        std::string line;
        std::size_t line_no = 0;
        std::vector<std::string> columns;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.empty())
                continue;
            std::vector<std::string> cells;
            std::stringstream ss(line);
            for (std::string cell; std::getline(ss, cell, ',');)
                cells.push_back(cell);
            if (columns.empty()) {
                columns = cells;
                for (const char* need : {"dataset", "method", "best_score", "avec"})
                    if (std::find(columns.begin(), columns.end(), need) == columns.end())
                        throw FormatError(path.string() + ": CSV header lacks column '" + need + "'");
                continue;
            }
            const auto cell = [&](const std::string& name) -> std::string {
                const auto it = std::find(columns.begin(), columns.end(), name);
                if (it == columns.end())
                    return {};
                const auto idx = static_cast<std::size_t>(it - columns.begin());
                return idx < cells.size() ? cells[idx] : std::string{};
            };
            try {
                BenchRecord r;
                r.dataset = cell("dataset");
                r.method = parse_bench_method(cell("method"));
                r.best_score = std::stod(cell("best_score"));
                r.avec = to_int_vector(FeatureVector::from_bit_string(cell("avec")));
                if (const auto metric = cell("metric_name"); !metric.empty())
                    r.metric_name = metric;
                records.push_back(std::move(r));
            } catch (const std::exception& e) {
                throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
    }
    resolve_specs(records, cfg);
    return records;
}

std::vector<BenchRecord> export_records(std::span<const TrainedRecord> records, const std::string& dataset,
                                        BenchMethod method)
{
    std::vector<BenchRecord> out;
    for (const auto& t : records) {
        BenchRecord r;
        r.dataset = dataset;
        r.method = method;
        r.spec = t.spec;
        r.avec = to_int_vector(t.avec);
        r.best_score = t.score;
        r.metric_name = t.metric_name.empty() ? "unknown" : t.metric_name;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<HistogramBin> histogram(std::span<const double> scores, std::size_t bins)
{
    if (scores.empty())
        throw DataError("histogram of an empty record set");
    if (bins == 0)
        throw DataError("histogram needs at least one bin");
    const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi == lo)
        return {HistogramBin{lo, scores.size()}};

    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<HistogramBin> out(bins);
    for (std::size_t b = 0; b < bins; ++b)
        out[b].lower = lo + static_cast<double>(b) * width;
    for (double s : scores) {
        auto b = static_cast<std::size_t>(std::floor((s - lo) / width));
        out[std::min(b, bins - 1)].count++;
    }
    return out;
}

std::vector<HistogramBin> histogram(std::span<const BenchRecord> records, std::size_t bins)
{
    std::vector<double> scores;
    for (const auto& r : records)
        scores.push_back(r.best_score);
    return histogram(scores, bins);
}

SurrogateDataset to_surrogate_dataset(std::span<const BenchRecord> records, const std::string& layout_fp)
{
    SurrogateDataset ds;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].avec.size() != records.front().avec.size())
            throw ShapeError("record " + std::to_string(i) + " has a different avec length than record 0");
        ds.features.push_back(to_feature_vector(records[i].avec, layout_fp));
        ds.scores.push_back(records[i].best_score);
    }
    return ds;
}

std::map<std::pair<std::string, BenchMethod>, std::size_t> partition_counts(std::span<const BenchRecord> records)
{
    std::map<std::pair<std::string, BenchMethod>, std::size_t> counts;
    for (const auto& r : records)
        counts[{r.dataset, r.method}]++;
    return counts;
}

std::map<ArchId, BenchEntry> lookup_table(std::span<const BenchRecord> records, const SearchSpaceConfig& cfg,
                                          const std::string& dataset)
{
    std::vector<BenchRecord> selected;
    for (const auto& r : records)
        if (dataset.empty() || r.dataset == dataset)
            selected.push_back(r);
    resolve_specs(selected, cfg);
    std::map<ArchId, BenchEntry> table;
    for (const auto& r : selected)
        table.emplace(canonical_id(*r.spec), BenchEntry{r.best_score, r.metric_name});
    return table;
}

}  // namespace seqnas
