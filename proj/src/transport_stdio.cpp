#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "unishield/error.hpp"
#include "unishield/transport.hpp"

extern char** environ;

namespace unishield {

namespace {
constexpr std::size_t kMaxReplyBytes = 64u << 20;
}

StdioTransport::StdioTransport(std::string command) : command_(std::move(command)) {}

StdioTransport::~StdioTransport() { stop(); }

void StdioTransport::start() {
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw Error(ErrorCode::AdapterUnavailable, std::string("socketpair: ") + std::strerror(errno));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDOUT_FILENO);
  const char* argv[] = {"/bin/sh", "-c", command_.c_str(), nullptr};
  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char**>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(sv[1]);
  if (rc != 0) {
    ::close(sv[0]);
    throw Error(ErrorCode::AdapterUnavailable, "cannot spawn adapter: " + command_);
  }
  fd_ = sv[0];
  pid_ = pid;
  pending_.clear();
}

void StdioTransport::stop() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  if (pid_ > 0) {
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
  }
  pending_.clear();
}

std::string StdioTransport::call(const AdapterRequest& request, std::chrono::milliseconds timeout) {
  std::lock_guard lock(mutex_);
  if (fd_ < 0) start();
  const auto deadline = std::chrono::steady_clock::now() + timeout;

  std::string line = request_to_wire(request);
  line += '\n';
  std::size_t sent = 0;
  while (sent < line.size()) {
    const auto n = ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      stop();
      throw Error(ErrorCode::AdapterError, "adapter process closed its input");
    }
    sent += static_cast<std::size_t>(n);
  }

  std::string& buf = pending_;
  while (true) {
    if (auto nl = buf.find('\n'); nl != std::string::npos) {
      std::string reply = buf.substr(0, nl);
      buf.erase(0, nl + 1);
      return reply;
    }
    if (buf.size() > kMaxReplyBytes) {
      stop();
      throw Error(ErrorCode::ProtocolViolation, "adapter reply line too long");
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      stop();
      throw Error(ErrorCode::Timeout, "adapter did not reply within " +
                                          std::to_string(timeout.count()) + " ms");
    }
    pollfd pfd{fd_, POLLIN, 0};
    const int pr = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (pr < 0) {
      if (errno == EINTR) continue;
      stop();
      throw Error(ErrorCode::AdapterError, std::string("poll: ") + std::strerror(errno));
    }
    if (pr == 0) continue;
    char chunk[65536];
    const auto n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      stop();
      throw Error(ErrorCode::AdapterError, "adapter process exited before replying");
    }
    buf.append(chunk, static_cast<std::size_t>(n));
  }
}

}  // namespace unishield
