#pragma once

#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace seqnas {

// One line-oriented duplex connection to a trainer: either the stdin/stdout
// pipes of a child process or a TCP socket. Not thread-safe.
class TrainerConnection {
public:
    using Clock = std::chrono::steady_clock;

    static std::unique_ptr<TrainerConnection> spawn(const std::vector<std::string>& argv,
                                                    const std::filesystem::path& working_dir);
    static std::unique_ptr<TrainerConnection> connect_tcp(const std::string& host, int port);

    ~TrainerConnection();
    TrainerConnection(const TrainerConnection&) = delete;
    TrainerConnection& operator=(const TrainerConnection&) = delete;

    // Throws TransportError.
    void send_line(const std::string& line);
    // Throws TimeoutError past the deadline, TransportError on EOF.
    std::string read_line(Clock::time_point deadline);

    bool broken() const { return broken_; }

private:
    TrainerConnection(int read_fd, int write_fd, pid_t child) : read_fd_(read_fd), write_fd_(write_fd), child_(child) {}

    int read_fd_ = -1;
    int write_fd_ = -1;
    pid_t child_ = -1;
    std::string buffer_;
    bool broken_ = false;
};

}  // namespace seqnas
