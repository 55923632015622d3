#include "seqnas/state_store.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <fstream>
#include <sstream>

#include "seqnas/errors.hpp"

namespace seqnas::state {

namespace fs = std::filesystem;

namespace {

void write_file_atomically(const fs::path& target, const std::string& content)
{
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IntegrityError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out)
            throw IntegrityError("failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec)
        throw IntegrityError("cannot publish " + target.string() + ": " + ec.message());
}

const char* kind_name(RunKind k)
{
    return k == RunKind::search ? "search" : "random_search";
}

json config_document(const SearchState& s)
{
    json j{{"kind", kind_name(s.kind)},
           {"search", s.search},
           {"space", s.space},
           {"predictor", s.predictor},
           {"evaluator", s.evaluator}};
    if (s.kind == RunKind::random_search)
        j["random"] = {{"budget", s.random_budget}, {"kd_enabled", s.random_kd}};
    return j;
}

json progress_document(const SearchState& s)
{
    const char* phase = s.complete                                       ? "done"
                        : s.kind == RunKind::random_search               ? "random"
                        : s.records.size() < static_cast<std::size_t>(s.search.n_init) ? "init"
                                                                         : "iterate";
    return json{{"seed", s.search.seed},
                {"phase", phase},
                {"iteration", s.iteration},
                {"committed", s.records.size()},
                {"complete", s.complete}};
}

json parse_file(const fs::path& path, std::vector<std::string>& problems)
{
    std::ifstream in(path);
    if (!in) {
        problems.push_back(path.filename().string() + " (missing)");
        return nullptr;
    }
    try {
        return json::parse(in);
    } catch (const json::exception&) {
        problems.push_back(path.filename().string() + " (malformed JSON)");
        return nullptr;
    }
}

[[noreturn]] void fail(const fs::path& dir, const std::vector<std::string>& problems)
{
    std::string msg = "damaged state in " + dir.string() + ":";
    for (const auto& p : problems)
        msg += " " + p + ";";
    msg.pop_back();
    throw IntegrityError(msg);
}

bool process_alive(pid_t pid)
{
    return pid > 0 && (::kill(pid, 0) == 0 || errno == EPERM);
}

}  // namespace

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / kLockFile)
{
    for (int attempt = 0; attempt < 2; ++attempt) {
        const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
        if (fd >= 0) {
            const std::string pid = std::to_string(::getpid()) + "\n";
            [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
            ::close(fd);
            return;
        }
        if (errno != EEXIST)
            throw LockError("cannot create " + path_.string());
        pid_t owner = 0;
        std::ifstream(path_) >> owner;
        if (process_alive(owner))
            throw LockError(dir.string() + " is in use by process " + std::to_string(owner));
        std::error_code ec;
        fs::remove(path_, ec);
    }
    throw LockError("cannot take over stale lock " + path_.string());
}

DirectoryLock::~DirectoryLock()
{
    std::error_code ec;
    fs::remove(path_, ec);
}

void initialize(const fs::path& dir, const SearchState& state)
{
    std::error_code ec;
    if (fs::exists(dir / kConfigFile, ec) || fs::exists(dir / kRecordsFile, ec))
        throw ConfigError(dir.string() + " already holds a run; use resume");
    fs::create_directories(dir / kPredictionsDir, ec);
    if (ec)
        throw ConfigError("cannot create state directory " + dir.string() + ": " + ec.message());
    write_file_atomically(dir / kConfigFile, config_document(state).dump(2) + "\n");
    write_file_atomically(dir / kRecordsFile, "");
    write_file_atomically(dir / kProgressFile, progress_document(state).dump() + "\n");
}

void commit(const fs::path& dir, std::span<const TrainedRecord> batch, const SearchState& state)
{
    if (!batch.empty()) {
        std::ofstream out(dir / kRecordsFile, std::ios::binary | std::ios::app);
        if (!out)
            throw IntegrityError("cannot append to " + (dir / kRecordsFile).string());
        for (const auto& r : batch)
            out << json(r).dump() << '\n';
        out.flush();
        if (!out)
            throw IntegrityError("failed appending to " + (dir / kRecordsFile).string());
    }
    write_file_atomically(dir / kProgressFile, progress_document(state).dump() + "\n");
}

SearchState read(const fs::path& dir)
{
    std::vector<std::string> problems;
    if (!fs::is_directory(dir))
        throw IntegrityError("no state directory at " + dir.string());

    const json config = parse_file(dir / kConfigFile, problems);
    const json progress = parse_file(dir / kProgressFile, problems);
    if (!problems.empty())
        fail(dir, problems);

    SearchState s;
    std::size_t committed = 0;
    try {
        const auto kind = config.at("kind").get<std::string>();
        if (kind == "search")
            s.kind = RunKind::search;
        else if (kind == "random_search")
            s.kind = RunKind::random_search;
        else
            throw ConfigError("unknown run kind '" + kind + "'");
        s.search = config.at("search").get<SearchConfig>();
        s.space = validate_config(config.at("space").get<SearchSpaceConfig>());
        s.predictor = config.at("predictor").get<PredictorConfig>();
        s.evaluator = config.value("evaluator", json::object());
        if (s.kind == RunKind::random_search) {
            s.random_budget = config.at("random").at("budget").get<int>();
            s.random_kd = config.at("random").at("kd_enabled").get<bool>();
        }
    } catch (const std::exception& e) {
        problems.push_back(std::string(kConfigFile) + " (" + e.what() + ")");
    }
    try {
        committed = progress.at("committed").get<std::size_t>();
        s.iteration = progress.at("iteration").get<int>();
        s.complete = progress.at("complete").get<bool>();
        if (problems.empty() && progress.at("seed").get<std::uint64_t>() != s.search.seed)
            problems.push_back(std::string(kProgressFile) + " (seed differs from config.json)");
    } catch (const std::exception& e) {
        problems.push_back(std::string(kProgressFile) + " (" + e.what() + ")");
    }
    if (!problems.empty())
        fail(dir, problems);

    std::ifstream in(dir / kRecordsFile);
    if (!in)
        fail(dir, {std::string(kRecordsFile) + " (missing)"});
    std::string line;
    std::size_t line_no = 0;
    while (s.records.size() < committed && std::getline(in, line)) {
        ++line_no;
        try {
            TrainedRecord r = json::parse(line).get<TrainedRecord>();
            r.avec.layout_fp = feature_layout(s.space).fingerprint;
            if (encode(r.spec, s.space) != r.avec)
                throw FormatError("avec does not match spec");
            s.records.push_back(std::move(r));
        } catch (const std::exception& e) {
            fail(dir, {std::string(kRecordsFile) + " line " + std::to_string(line_no) + " (" + e.what() + ")"});
        }
    }
    if (s.records.size() < committed)
        fail(dir, {std::string(kRecordsFile) + " (holds " + std::to_string(s.records.size()) + " records, " +
                   kProgressFile + " commits " + std::to_string(committed) + ")"});
    if (s.complete && s.records.size() != s.planned_records())
        fail(dir, {std::string(kProgressFile) + " (marked complete with " + std::to_string(committed) +
                   " of " + std::to_string(s.planned_records()) + " records)"});
    return s;
}

void discard_uncommitted(const fs::path& dir, std::size_t committed)
{
    const fs::path path = dir / kRecordsFile;
    std::ifstream in(path, std::ios::binary);
    std::string kept, line;
    for (std::size_t n = 0; n < committed && std::getline(in, line); ++n)
        kept += line + '\n';
    in.close();
    if (fs::file_size(path) != kept.size())
        write_file_atomically(path, kept);
}

}  // namespace seqnas::state
