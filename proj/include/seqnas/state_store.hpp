#pragma once

#include <filesystem>
#include <span>

#include "seqnas/engine.hpp"

namespace seqnas::state {

// Layout of a run directory:
//   config.json    run kind and all configs
//   records.jsonl  one TrainedRecord per line, append-only
//   rng.json       commit point: committed record count and progress
//   predictions/   teacher cache
//   LOCK           pid of the owning process
inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kRecordsFile = "records.jsonl";
inline constexpr const char* kProgressFile = "rng.json";
inline constexpr const char* kPredictionsDir = "predictions";
inline constexpr const char* kLockFile = "LOCK";

// Exclusive ownership of a state directory. A lock left by a process that
// no longer exists is taken over.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::filesystem::path& dir);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    std::filesystem::path path_;
};

// Starts a fresh directory holding no records. Throws ConfigError when the
// directory already holds a run.
void initialize(const std::filesystem::path& dir, const SearchState& state);

// Appends a batch and then moves the commit point past it.
void commit(const std::filesystem::path& dir, std::span<const TrainedRecord> batch, const SearchState& state);

// Loads the committed part of a run; throws IntegrityError naming the
// offending files when the directory is damaged.
SearchState read(const std::filesystem::path& dir);

// Drops record lines written after the last commit point.
void discard_uncommitted(const std::filesystem::path& dir, std::size_t committed);

}  // namespace seqnas::state
