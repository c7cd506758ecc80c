#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>

#include "unishield/protocol.hpp"

namespace unishield {

/// Moves one request to an adapter and returns its raw reply text. Transports
/// never interpret replies; schema checks happen in parse_reply().
class Transport {
 public:
  virtual ~Transport() = default;

  /// Throws Error{Timeout}, Error{AdapterUnavailable} or Error{AdapterError}
  /// for transport-level failures.
  virtual std::string call(const AdapterRequest& request, std::chrono::milliseconds timeout) = 0;
};

/// Adapter living in this process, backed by a callable.
class FunctionTransport final : public Transport {
 public:
  using Handler = std::function<std::string(const AdapterRequest&)>;
  explicit FunctionTransport(Handler handler) : handler_(std::move(handler)) {}

  std::string call(const AdapterRequest& request, std::chrono::milliseconds) override {
    return handler_(request);
  }

 private:
  Handler handler_;
};

/// One JSON object per line over a child process's stdin/stdout. The child
/// is started lazily with `/bin/sh -c <command>` and restarted after a
/// timeout or exit. Calls are serialized.
class StdioTransport final : public Transport {
 public:
  explicit StdioTransport(std::string command);
  ~StdioTransport() override;
  StdioTransport(const StdioTransport&) = delete;
  StdioTransport& operator=(const StdioTransport&) = delete;

  std::string call(const AdapterRequest& request, std::chrono::milliseconds timeout) override;

 private:
  void start();
  void stop();

  std::string command_;
  std::mutex mutex_;
  int fd_ = -1;
  int pid_ = -1;
  std::string pending_;  // bytes read past the previous newline
};

/// POST of the request body to `<base>/v1/detect` (or to the exact URL when it
/// already carries a path).
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::string url);
  std::string call(const AdapterRequest& request, std::chrono::milliseconds timeout) override;

 private:
  std::string base_;
  std::string path_;
};

/// Decorator that counts calls per task; used to check dispatch invariants.
class CountingTransport final : public Transport {
 public:
  explicit CountingTransport(std::shared_ptr<Transport> inner) : inner_(std::move(inner)) {}

  std::string call(const AdapterRequest& request, std::chrono::milliseconds timeout) override {
    counts_[static_cast<std::size_t>(request.task)].fetch_add(1);
    return inner_->call(request, timeout);
  }

  std::size_t calls(AdapterTask task) const { return counts_[static_cast<std::size_t>(task)].load(); }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& c : counts_) n += c.load();
    return n;
  }

 private:
  std::shared_ptr<Transport> inner_;
  std::array<std::atomic<std::size_t>, 4> counts_{};
};

}  // namespace unishield
