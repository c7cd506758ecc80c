#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "unishield/pipeline.hpp"

namespace httplib {
class Server;
}

namespace unishield {

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// POST /v1/analyze on raw image bytes. 200 with the report, 400 on
/// undecodable input, 422 for pipeline errors.
HttpReply analyze_image_bytes(const Pipeline& pipeline, std::span<const std::uint8_t> bytes);

/// JSON body {"image_b64": "..."}.
HttpReply analyze_json_body(const Pipeline& pipeline, std::string_view body);

/// GET /v1/tools.
HttpReply tools_listing(const Pipeline& pipeline);

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;        // 0 picks a free port
  int max_concurrency = 8;
};

/// HTTP front door. The pipeline must outlive the service.
class Service {
 public:
  Service(const Pipeline& pipeline, ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the socket; returns the bound port. Throws Error{IoError}.
  int bind();
  /// Blocks until stop(). In-flight requests finish before it returns.
  void serve();
  void stop();
  int port() const { return port_; }

 private:
  const Pipeline& pipeline_;
  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = 0;
};

}  // namespace unishield
