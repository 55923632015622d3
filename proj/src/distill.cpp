#include "seqnas/distill.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstring>
#include <fstream>
#include <sstream>

#include "seqnas/detail/little_endian.hpp"
#include "seqnas/hashing.hpp"
#include "seqnas/json_io.hpp"

namespace seqnas {

namespace fs = std::filesystem;

namespace {

std::atomic<unsigned long> temp_counter{0};

fs::path temp_path_for(const fs::path& target)
{
    return target.string() + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(temp_counter++);
}

void publish(const fs::path& target, const std::string& bytes)
{
    const fs::path tmp = temp_path_for(target);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out)
            throw CacheError("failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw CacheError("failed publishing " + target.string());
    }
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw CacheError("cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string encode_floats(const LogitMatrix& m)
{
    std::string bytes(m.values.size() * sizeof(float), '\0');
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        const float v = detail::to_little(m.values[i]);
        std::memcpy(bytes.data() + i * sizeof(float), &v, sizeof v);
    }
    return bytes;
}

std::string descriptor_text(const CacheDescriptor& d)
{
    return json{{"rows", d.rows}, {"cols", d.cols}, {"fingerprint", d.fingerprint}}.dump();
}

}  // namespace

std::string example_order_fingerprint(std::span<const std::string> example_ids)
{
    std::string joined;
    for (const auto& id : example_ids) {
        joined += id;
        joined += '\n';
    }
    return sha256_hex(joined);
}

PredictionCache::PredictionCache(fs::path dir) : dir_(std::move(dir))
{
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_))
        throw CacheError("cannot create prediction cache directory " + dir_.string());
}

std::string PredictionCache::data_file_name(const ArchId& id)
{
    return "preds_" + id.str() + ".f32";
}

std::string PredictionCache::descriptor_file_name(const ArchId& id)
{
    return "preds_" + id.str() + ".json";
}

void PredictionCache::write(const ArchId& id, const LogitMatrix& logits, const std::string& fingerprint) const
{
    if (logits.values.size() != logits.rows * logits.cols)
        throw ShapeError("logit matrix storage does not match its shape");
    const CacheDescriptor desc{logits.rows, logits.cols, fingerprint};
    if (contains(id)) {
        if (descriptor(id) == desc && read(id) == logits)
            return;
        throw CacheError("cache entry " + id.str() + " already exists with different content");
    }
    publish(dir_ / data_file_name(id), encode_floats(logits));
    publish(dir_ / descriptor_file_name(id), descriptor_text(desc));
}

bool PredictionCache::contains(const ArchId& id) const
{
    return fs::exists(dir_ / descriptor_file_name(id)) && fs::exists(dir_ / data_file_name(id));
}

CacheDescriptor PredictionCache::descriptor(const ArchId& id) const
{
    const fs::path p = dir_ / descriptor_file_name(id);
    if (!fs::exists(p))
        throw CacheError("no cache entry for " + id.str());
    try {
        const json j = json::parse(slurp(p));
        return CacheDescriptor{j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                               j.at("fingerprint").get<std::string>()};
    } catch (const json::exception& e) {
        throw CacheError("malformed cache descriptor " + p.string() + ": " + e.what());
    }
}

LogitMatrix PredictionCache::read(const ArchId& id) const
{
    const CacheDescriptor d = descriptor(id);
    const std::string bytes = slurp(dir_ / data_file_name(id));
    if (bytes.size() != d.rows * d.cols * sizeof(float))
        throw CacheError("cache entry " + id.str() + " has " + std::to_string(bytes.size()) +
                         " bytes, descriptor implies " + std::to_string(d.rows * d.cols * sizeof(float)));
    LogitMatrix m(d.rows, d.cols);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        float v;
        std::memcpy(&v, bytes.data() + i * sizeof(float), sizeof v);
        m.values[i] = detail::to_little(v);
    }
    return m;
}

TeacherEnsemble select_teachers(std::span<const TrainedRecord> records, std::size_t k, const PredictionCache& cache)
{
    if (records.empty())
        throw DataError("select_teachers: no records");
    if (k == 0)
        throw DataError("select_teachers: k must be positive");
    std::vector<const TrainedRecord*> ranked;
    for (const auto& r : records) {
        if (!std::isfinite(r.score))
            throw DataError("select_teachers: record " + r.arch_id.str() + " has a non-finite score");
        if (!r.preds_ref || !cache.contains(*r.preds_ref))
            throw CacheError("select_teachers: record " + r.arch_id.str() + " has no cache entry");
        ranked.push_back(&r);
    }
    const std::size_t take = std::min(k, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take), ranked.end(),
                      [](const TrainedRecord* a, const TrainedRecord* b) {
                          return a->score > b->score || (a->score == b->score && a->arch_id < b->arch_id);
                      });
    TeacherEnsemble ens;
    for (std::size_t i = 0; i < take; ++i)
        ens.teacher_ids.push_back(*ranked[i]->preds_ref);
    return ens;
}

Matrix<double> ensemble_targets(const PredictionCache& cache, const TeacherEnsemble& ensemble,
                                const std::optional<std::vector<std::size_t>>& row_indices)
{
    if (ensemble.teacher_ids.empty())
        throw DataError("ensemble_targets: empty teacher ensemble");
    const CacheDescriptor first = cache.descriptor(ensemble.teacher_ids.front());
    for (const auto& id : ensemble.teacher_ids)
        if (cache.descriptor(id) != first)
            throw CacheError("ensemble_targets: descriptor of " + id.str() + " differs from " +
                             ensemble.teacher_ids.front().str() + " (rows/cols/fingerprint)");

    std::vector<std::size_t> rows;
    if (row_indices) {
        rows = *row_indices;
        for (auto r : rows)
            if (r >= first.rows)
                throw ShapeError("ensemble_targets: row index " + std::to_string(r) + " out of range");
    } else {
        for (std::size_t r = 0; r < first.rows; ++r)
            rows.push_back(r);
    }

    Matrix<double> out(rows.size(), first.cols, 0.0);
    for (const auto& id : ensemble.teacher_ids) {
        const LogitMatrix m = cache.read(id);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t c = 0; c < first.cols; ++c)
                out(i, c) += m(rows[i], c);
    }
    const double n = static_cast<double>(ensemble.teacher_ids.size());
    for (auto& v : out.values)
        v /= n;
    return out;
}

}  // namespace seqnas
