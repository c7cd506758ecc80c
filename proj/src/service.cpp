#include "unishield/service.hpp"

#include "httplib.h"
#include "json.hpp"
#include "unishield/encoding.hpp"
#include "unishield/error.hpp"
#include "unishield/image_io.hpp"

namespace unishield {

using nlohmann::json;

namespace {

HttpReply error_reply(int status, std::string_view code, std::string_view message,
                      Stage stage = Stage::kNone) {
  json j{{"error", code}, {"message", message}, {"stage", to_string(stage)}};
  return {status, "application/json", j.dump() + "\n"};
}

}  // namespace

HttpReply analyze_image_bytes(const Pipeline& pipeline, std::span<const std::uint8_t> bytes) {
  ImageRecord image;
  try {
    image = ImageRecord::decode(content_id(bytes), {bytes.begin(), bytes.end()});
  } catch (const Error& e) {
    return error_reply(400, to_string(e.code()), e.what());
  }
  try {
    const auto run = pipeline.run(image);
    return {200, "application/json", report_to_json_text(run.report)};
  } catch (const Error& e) {
    const int status = e.code() == ErrorCode::Timeout ? 504 : 422;
    return error_reply(status, to_string(e.code()), e.what(), e.stage());
  } catch (const std::exception& e) {
    return error_reply(500, "Internal", e.what());
  }
}

HttpReply analyze_json_body(const Pipeline& pipeline, std::string_view body) {
  std::vector<std::uint8_t> bytes;
  try {
    const auto j = json::parse(body);
    bytes = base64_decode(j.at("image_b64").get<std::string>());
  } catch (const json::exception& e) {
    return error_reply(400, "InvalidArgument", std::string("expected {\"image_b64\": ...}: ") + e.what());
  } catch (const Error& e) {
    return error_reply(400, to_string(ErrorCode::DecodeError), e.what());
  }
  return analyze_image_bytes(pipeline, bytes);
}

HttpReply tools_listing(const Pipeline& pipeline) {
  json tools = json::array();
  for (const auto& d : pipeline.toolbox().registry().list()) tools.push_back(descriptor_to_json(d));
  return {200, "application/json", json{{"tools", tools}}.dump(2) + "\n"};
}

Service::Service(const Pipeline& pipeline, ServiceOptions options)
    : pipeline_(pipeline), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  const auto threads = static_cast<std::size_t>(std::max(1, options_.max_concurrency));
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  // The library default adds SO_REUSEPORT, which lets a second server share a busy port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });

  auto send = [](httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server_->Post("/v1/analyze", [this, send](const httplib::Request& req, httplib::Response& res) {
    if (req.is_multipart_form_data()) {
      if (!req.has_file("image")) {
        send(res, error_reply(400, "InvalidArgument", "multipart field 'image' is missing"));
        return;
      }
      const auto& content = req.get_file_value("image").content;
      const std::vector<std::uint8_t> bytes(content.begin(), content.end());
      send(res, analyze_image_bytes(pipeline_, bytes));
      return;
    }
    send(res, analyze_json_body(pipeline_, req.body));
  });
  server_->Get("/v1/tools", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, tools_listing(pipeline_));
  });
  server_->Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"status\":\"ok\"}\n", "application/json");
  });
}

Service::~Service() { stop(); }

int Service::bind() {
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
    if (port_ < 0) throw Error(ErrorCode::IoError, "cannot bind " + options_.host);
  } else {
    if (!server_->bind_to_port(options_.host, options_.port)) {
      throw Error(ErrorCode::IoError,
                  "cannot bind " + options_.host + ":" + std::to_string(options_.port));
    }
    port_ = options_.port;
  }
  return port_;
}

void Service::serve() { server_->listen_after_bind(); }

void Service::stop() {
  if (server_) server_->stop();
}

}  // namespace unishield
