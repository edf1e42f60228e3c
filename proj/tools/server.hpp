#pragma once

#include "kern/service.hpp"

#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>

#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace kern {

struct ServerOptions {
    std::string address = "127.0.0.1";
    unsigned short port = 8080;  // 0 picks a free port
    std::filesystem::path ui_root;  // static files served at /; empty serves nothing
};

/// HTTP server: WebSocket protocol endpoint at /api, static files elsewhere.
/// Each connection gets its own thread; the Service serializes requests.
class Server {
public:
    Server(Service& service, ServerOptions opts);  // binds immediately
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    unsigned short port() const { return port_; }

    /// Accepts connections until stop().
    void run();
    void stop();

private:
    void accept();
    void connection(boost::asio::ip::tcp::socket socket);

    Service& service_;
    ServerOptions opts_;
    boost::asio::io_context ioc_;
    boost::asio::ip::tcp::acceptor acceptor_;
    unsigned short port_ = 0;
    std::mutex mu_;
    std::vector<std::thread> workers_;
};

/// Line-delimited protocol: one request per input line, each output
/// message on its own line. Returns at end of input.
void serve_stdio(Service& service, std::istream& in, std::ostream& out);

}  // namespace kern
