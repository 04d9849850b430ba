#include "skillmatch/server.hpp"

#include <httplib.h>
#include <json.hpp>

namespace skillmatch {

namespace {

HttpReply error_reply(int status, const std::string& kind, const std::string& message) {
  return {status, nlohmann::json{{"schema_version", kApiSchemaVersion}, {"error", kind}, {"message", message}}.dump()};
}

template <typename Fn>
HttpReply guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const RequestError& e) {
    return error_reply(400, "schema_error", e.what());
  } catch (const EncoderError& e) {
    return error_reply(400, "schema_error", e.what());
  } catch (const std::exception& e) {
    return error_reply(500, "internal_error", e.what());
  }
}

}  // namespace

HttpReply handle_encode(const Retriever& retriever, const std::string& body) {
  return guarded([&] {
    const auto doc = parse_encode_request(body, retriever.model().registry);
    return HttpReply{200, embedding_to_json(retriever.encode(doc))};
  });
}

HttpReply handle_retrieve(const Retriever& retriever, const std::string& body) {
  return guarded([&] {
    const auto request = parse_retrieve_request(body, retriever.model().registry);
    return HttpReply{200, hits_to_json(retriever.retrieve(request))};
  });
}

HttpReply handle_healthz() { return {200, "ok", "text/plain"}; }

struct Server::Impl {
  std::shared_ptr<const Retriever> retriever;
  httplib::Server http;
};

Server::Server(std::shared_ptr<const Retriever> retriever) : impl_(std::make_unique<Impl>()) {
  impl_->retriever = std::move(retriever);
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
  };
  const Retriever* r = impl_->retriever.get();
  impl_->http.Get("/healthz", [send](const httplib::Request&, httplib::Response& res) { send(res, handle_healthz()); });
  impl_->http.Post("/encode", [send, r](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_encode(*r, req.body));
  });
  impl_->http.Post("/retrieve", [send, r](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_retrieve(*r, req.body));
  });
}

Server::~Server() { stop(); }

bool Server::listen(const std::string& host, int port) { return impl_->http.listen(host, port); }

int Server::bind(const std::string& host, int port) {
  return port == 0 ? impl_->http.bind_to_any_port(host) : (impl_->http.bind_to_port(host, port) ? port : -1);
}

bool Server::serve() { return impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

bool Server::wait_until_ready() const {
  impl_->http.wait_until_ready();
  return impl_->http.is_running();
}

}  // namespace skillmatch
