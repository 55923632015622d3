#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqnas/errors.hpp"
#include "seqnas/records.hpp"

namespace seqnas {

template <typename T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> values;  // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), values(r * c, fill) {}

    T& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    bool operator==(const Matrix&) const = default;
};

using LogitMatrix = Matrix<float>;

struct CacheDescriptor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    // SHA-256 of the canonical example-id list the rows follow.
    std::string fingerprint;

    bool operator==(const CacheDescriptor&) const = default;
};

std::string example_order_fingerprint(std::span<const std::string> example_ids);

// Directory of per-architecture logit matrices:
//   preds_<archid>.f32   row-major float32, little-endian
//   preds_<archid>.json  {"rows", "cols", "fingerprint"}
// Entries are write-once; both files are published by atomic rename and the
// descriptor is renamed last, so a visible descriptor means a complete entry.
class PredictionCache {
public:
    explicit PredictionCache(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }

    static std::string data_file_name(const ArchId& id);
    static std::string descriptor_file_name(const ArchId& id);

    // Rewriting an entry with identical content is a no-op; different
    // content raises CacheError.
    void write(const ArchId& id, const LogitMatrix& logits, const std::string& fingerprint) const;

    bool contains(const ArchId& id) const;
    CacheDescriptor descriptor(const ArchId& id) const;
    LogitMatrix read(const ArchId& id) const;

private:
    std::filesystem::path dir_;
};

struct TeacherEnsemble {
    std::vector<ArchId> teacher_ids;  // best score first
};

// The k highest-scoring records, ties by ascending arch id. Every record must
// have a cache entry.
TeacherEnsemble select_teachers(std::span<const TrainedRecord> records, std::size_t k, const PredictionCache& cache);

// Element-wise mean of the teachers' logits, restricted to row_indices when given.
Matrix<double> ensemble_targets(const PredictionCache& cache, const TeacherEnsemble& ensemble,
                                const std::optional<std::vector<std::size_t>>& row_indices = std::nullopt);

// Mean squared difference over all elements.
template <typename A, typename B>
double kd_loss(const Matrix<A>& student, const Matrix<B>& teacher)
{
    if (student.rows != teacher.rows || student.cols != teacher.cols)
        throw ShapeError("kd_loss: student is " + std::to_string(student.rows) + "x" + std::to_string(student.cols) +
                         ", teacher is " + std::to_string(teacher.rows) + "x" + std::to_string(teacher.cols));
    if (student.values.empty())
        return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < student.values.size(); ++i) {
        const double d = static_cast<double>(student.values[i]) - static_cast<double>(teacher.values[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(student.values.size());
}

}  // namespace seqnas
