#include "server.hpp"

#include <boost/asio/post.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <istream>
#include <ostream>

namespace kern {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

const char* mime_type(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs") return "text/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json" || ext == ".map") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    if (ext == ".ico") return "image/x-icon";
    if (ext == ".woff2") return "font/woff2";
    return "application/octet-stream";
}

http::response<http::string_body> text_response(const http::request<http::string_body>& req, http::status status,
                                                std::string body) {
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::content_type, "text/plain; charset=utf-8");
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
}

// Maps a request target to a file under root, or nothing if it escapes it.
std::optional<std::filesystem::path> resolve(const std::filesystem::path& root, std::string_view target) {
    if (auto q = target.find_first_of("?#"); q != std::string_view::npos) target = target.substr(0, q);
    if (target.empty() || target.front() != '/') return std::nullopt;
    std::filesystem::path rel(std::string(target.substr(1)));
    for (const auto& part : rel) {
        if (part == "..") return std::nullopt;
    }
    auto path = root / rel;
    if (target.back() == '/') path /= "index.html";
    return path;
}

void serve_websocket(Service& service, tcp::socket socket, const http::request<http::string_body>& req) {
    websocket::stream<tcp::socket> ws(std::move(socket));
    ws.accept(req);
    beast::flat_buffer buffer;
    for (;;) {
        beast::error_code ec;
        ws.read(buffer, ec);
        if (ec) return;  // closed or reset
        const auto text = beast::buffers_to_string(buffer.data());
        buffer.consume(buffer.size());
        ws.text(true);
        for (const auto& msg : service.handle_line(text)) ws.write(asio::buffer(msg));
    }
}

}  // namespace

Server::Server(Service& service, ServerOptions opts)
    : service_(service), opts_(std::move(opts)), acceptor_(ioc_) {
    const tcp::endpoint endpoint(asio::ip::make_address(opts_.address), opts_.port);
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(asio::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen();
    port_ = acceptor_.local_endpoint().port();
}

Server::~Server() {
    stop();
    std::lock_guard lock(mu_);
    for (auto& w : workers_) {
        if (w.joinable()) w.join();
    }
}

void Server::run() {
    accept();
    ioc_.run();
}

void Server::stop() {
    asio::post(ioc_, [this] {
        beast::error_code ec;
        acceptor_.close(ec);
    });
    ioc_.stop();
}

void Server::accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (ec) return;
        {
            std::lock_guard lock(mu_);
            workers_.emplace_back([this, s = std::move(socket)]() mutable { connection(std::move(s)); });
        }
        accept();
    });
}

void Server::connection(tcp::socket socket) {
    beast::flat_buffer buffer;
    beast::error_code ec;
    for (;;) {
        http::request<http::string_body> req;
        http::read(socket, buffer, req, ec);
        if (ec) return;
        if (websocket::is_upgrade(req)) {
            if (req.target() != "/api") {
                http::write(socket, text_response(req, http::status::not_found, "websocket endpoint is /api\n"), ec);
                return;
            }
            try {
                serve_websocket(service_, std::move(socket), req);
            } catch (const beast::system_error&) {
            }
            return;
        }
        if (req.method() != http::verb::get && req.method() != http::verb::head) {
            http::write(socket, text_response(req, http::status::method_not_allowed, "GET only\n"), ec);
        } else if (opts_.ui_root.empty()) {
            http::write(socket, text_response(req, http::status::not_found, "no UI bundle; start with --ui DIR\n"),
                        ec);
        } else if (auto path = resolve(opts_.ui_root, std::string_view(req.target().data(), req.target().size())); !path) {
            http::write(socket, text_response(req, http::status::bad_request, "bad path\n"), ec);
        } else {
            http::file_body::value_type body;
            body.open(path->string().c_str(), beast::file_mode::scan, ec);
            if (ec) {
                ec = {};
                http::write(socket, text_response(req, http::status::not_found, "not found\n"), ec);
            } else {
                const auto size = body.size();
                const char* type = mime_type(*path);
                if (req.method() == http::verb::head) {
                    http::response<http::empty_body> res{http::status::ok, req.version()};
                    res.set(http::field::content_type, type);
                    res.content_length(size);
                    res.keep_alive(req.keep_alive());
                    http::write(socket, res, ec);
                } else {
                    http::response<http::file_body> res{std::piecewise_construct, std::make_tuple(std::move(body)),
                                                        std::make_tuple(http::status::ok, req.version())};
                    res.set(http::field::content_type, type);
                    res.content_length(size);
                    res.keep_alive(req.keep_alive());
                    http::write(socket, res, ec);
                }
            }
        }
        if (ec || !req.keep_alive()) break;
    }
    socket.shutdown(tcp::socket::shutdown_send, ec);
}

void serve_stdio(Service& service, std::istream& in, std::ostream& out) {
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        for (const auto& msg : service.handle_line(line)) out << msg << '\n';
        out.flush();
    }
}

}  // namespace kern
