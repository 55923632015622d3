#include "seqnas/line_channel.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>

#include "seqnas/errors.hpp"

namespace seqnas {

namespace {

void ignore_sigpipe()
{
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

std::unique_ptr<TrainerConnection> TrainerConnection::spawn(const std::vector<std::string>& argv,
                                                            const std::filesystem::path& working_dir)
{
    if (argv.empty())
        throw TransportError("empty trainer command");
    ignore_sigpipe();

    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0)
        throw TransportError(std::string("pipe failed: ") + std::strerror(errno));
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw TransportError(std::string("pipe failed: ") + std::strerror(errno));
    }

    std::vector<char*> args;
    for (const auto& a : argv)
        args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    const std::string dir = working_dir.string();

    const pid_t pid = ::fork();
    if (pid < 0) {
        for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]})
            ::close(fd);
        throw TransportError(std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        if (!dir.empty() && ::chdir(dir.c_str()) != 0)
            ::_exit(126);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    return std::unique_ptr<TrainerConnection>(new TrainerConnection(from_child[0], to_child[1], pid));
}

std::unique_ptr<TrainerConnection> TrainerConnection::connect_tcp(const std::string& host, int port)
{
    ignore_sigpipe();
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    const std::string service = std::to_string(port);
    if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0)
        throw TransportError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    int fd = -1;
    for (addrinfo* a = found; a; a = a->ai_next) {
        fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
        if (fd < 0)
            continue;
        if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0)
            break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(found);
    if (fd < 0)
        throw TransportError("cannot connect to " + host + ":" + service);
    return std::unique_ptr<TrainerConnection>(new TrainerConnection(fd, fd, -1));
}

TrainerConnection::~TrainerConnection()
{
    if (write_fd_ >= 0 && write_fd_ != read_fd_)
        ::close(write_fd_);
    if (read_fd_ >= 0)
        ::close(read_fd_);
    if (child_ > 0) {
        // A healthy child exits on stdin EOF; a hung one is killed.
        if (!broken_)
            for (int i = 0; i < 50; ++i) {
                if (::waitpid(child_, nullptr, WNOHANG) == child_)
                    return;
                std::this_thread::sleep_for(std::chrono::milliseconds(20));
            }
        ::kill(child_, SIGKILL);
        ::waitpid(child_, nullptr, 0);
    }
}

void TrainerConnection::send_line(const std::string& line)
{
    std::string data = line;
    data += '\n';
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = (child_ > 0) ? ::write(write_fd_, data.data() + off, data.size() - off)
                                       : ::send(write_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            broken_ = true;
            throw TransportError(std::string("write to trainer failed: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

std::string TrainerConnection::read_line(Clock::time_point deadline)
{
    for (;;) {
        if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            return line;
        }
        const auto remaining =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
        if (remaining <= 0) {
            broken_ = true;
            throw TimeoutError("trainer did not reply before the deadline");
        }
        pollfd pfd{read_fd_, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining, 1 << 30)));
        if (rc < 0) {
            if (errno == EINTR)
                continue;
            broken_ = true;
            throw TransportError(std::string("poll failed: ") + std::strerror(errno));
        }
        if (rc == 0)
            continue;
        char chunk[4096];
        const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN)
                continue;
            broken_ = true;
            throw TransportError(std::string("read from trainer failed: ") + std::strerror(errno));
        }
        if (n == 0) {
            broken_ = true;
            throw TransportError("trainer closed the connection");
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

}  // namespace seqnas
