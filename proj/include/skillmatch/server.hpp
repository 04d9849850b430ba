#pragma once

#include <memory>
#include <string>

#include "skillmatch/retrieval.hpp"

namespace skillmatch {

struct HttpReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// Request handlers, independent of the transport.
HttpReply handle_encode(const Retriever& retriever, const std::string& body);
HttpReply handle_retrieve(const Retriever& retriever, const std::string& body);
HttpReply handle_healthz();

// HTTP front end: POST /encode, POST /retrieve, GET /healthz.
class Server {
 public:
  explicit Server(std::shared_ptr<const Retriever> retriever);
  ~Server();

  // Binds and serves until stop(); port 0 picks a free port.
  bool listen(const std::string& host, int port);
  // Binds without serving; returns the bound port or -1.
  int bind(const std::string& host, int port);
  // Serves on a socket bound by bind().
  bool serve();
  void stop();
  bool wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace skillmatch
