#include "httplib.h"
#include "unishield/error.hpp"
#include "unishield/transport.hpp"

namespace unishield {

HttpTransport::HttpTransport(std::string url) {
  const auto scheme = url.find("://");
  const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    base_ = url;
    path_ = "/v1/detect";
  } else {
    base_ = url.substr(0, path_start);
    path_ = url.substr(path_start);
    if (path_ == "/") path_ = "/v1/detect";
  }
}

std::string HttpTransport::call(const AdapterRequest& request, std::chrono::milliseconds timeout) {
  httplib::Client client(base_);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  auto res = client.Post(path_, request_to_wire(request), "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::Write ||
        err == httplib::Error::ConnectionTimeout) {
      throw Error(ErrorCode::Timeout, "adapter HTTP call timed out: " + httplib::to_string(err));
    }
    throw Error(ErrorCode::AdapterUnavailable, "adapter HTTP call failed: " + httplib::to_string(err));
  }
  if (res->status != 200 && res->body.empty()) {
    throw Error(ErrorCode::AdapterError, "adapter HTTP status " + std::to_string(res->status));
  }
  return res->body;
}

}  // namespace unishield
