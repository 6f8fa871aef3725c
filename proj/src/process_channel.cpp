#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include "arena/agents.hpp"
#include "arena/error.hpp"

namespace arena {

namespace {

class ProcessChannel final : public AgentChannel {
 public:
  explicit ProcessChannel(const std::vector<std::string>& argv) : command_(argv.empty() ? "" : argv.front()) {
    if (argv.empty()) return;
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) return;

    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    pid_ = ::fork();
    if (pid_ == 0) {
      ::dup2(sv[1], STDIN_FILENO);
      ::dup2(sv[1], STDOUT_FILENO);
      ::execvp(args[0], args.data());
      ::_exit(127);
    }
    ::close(sv[1]);
    if (pid_ < 0) {
      ::close(sv[0]);
      return;
    }
    fd_ = sv[0];
  }

  ~ProcessChannel() override { shut_down(); }

  Json exchange(const Json& request, int timeout_ms) override {
    if (fd_ < 0) fail("is not running");
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);

    const std::string line = request.dump() + "\n";
    std::size_t sent = 0;
    while (sent < line.size()) {
      const ssize_t n = ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) fail("closed its input");
      sent += static_cast<std::size_t>(n);
    }

    const auto want = request.contains("id") ? request["id"] : Json();
    for (;;) {
      std::string reply;
      if (!read_line(reply, deadline)) fail("did not answer in time");
      Json parsed = Json::parse(reply, nullptr, false);
      if (parsed.is_discarded() || !parsed.is_object()) continue;
      // Stale replies to earlier, timed-out requests are skipped.
      if (parsed.contains("id") && parsed["id"] == want) return parsed;
    }
  }

 private:
  [[noreturn]] void fail(const std::string& why) {
    shut_down();
    throw ArenaError(ErrorCode::AgentUnavailable, "external agent '" + command_ + "' " + why);
  }

  bool read_line(std::string& out, std::chrono::steady_clock::time_point deadline) {
    for (;;) {
      if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
        out = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        return true;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return false;
      pollfd p{fd_, POLLIN, 0};
      const int ready = ::poll(&p, 1, static_cast<int>(left.count()));
      if (ready < 0 && errno == EINTR) continue;
      if (ready <= 0) return false;
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void shut_down() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
    if (pid_ > 0) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
      pid_ = -1;
    }
  }

  std::string command_;
  pid_t pid_ = -1;
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace

std::unique_ptr<AgentChannel> spawn_process_channel(const std::vector<std::string>& argv) {
  return std::make_unique<ProcessChannel>(argv);
}

}  // namespace arena
