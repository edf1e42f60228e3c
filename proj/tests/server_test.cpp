#include "server.hpp"

#include "support/corpus.hpp"

#include <boost/asio/connect.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

using namespace kern;
using namespace kern::testing;

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class Running {
public:
    explicit Running(ServerOptions opts) : server_(service_, [&] {
          opts.port = 0;
          return opts;
      }()) {
        thread_ = std::thread([this] { server_.run(); });
    }
    ~Running() {
        server_.stop();
        thread_.join();
    }
    unsigned short port() const { return server_.port(); }

private:
    Service service_;
    Server server_;
    std::thread thread_;
};

http::response<http::string_body> get(unsigned short port, const std::string& target) {
    asio::io_context ioc;
    tcp::socket socket(ioc);
    socket.connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), port));
    http::request<http::empty_body> req{http::verb::get, target, 11};
    req.set(http::field::host, "localhost");
    http::write(socket, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(socket, buffer, res);
    return res;
}

struct UiDir {
    std::filesystem::path root;
    UiDir() {
        root = std::filesystem::temp_directory_path() / ("kern_ui_" + std::to_string(::getpid()));
        std::filesystem::create_directories(root / "assets");
        std::ofstream(root / "index.html") << "<!doctype html><title>kern</title>";
        std::ofstream(root / "assets" / "app.js") << "console.log(1);";
    }
    ~UiDir() { std::filesystem::remove_all(root); }
};

}  // namespace

TEST(Server, WebSocketSpeaksTheProtocol) {
    Running srv(ServerOptions{});
    asio::io_context ioc;
    websocket::stream<tcp::socket> ws(ioc);
    ws.next_layer().connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), srv.port()));
    ws.handshake("localhost", "/api");

    const json load{{"id", 1}, {"method", "load"},
                    {"params", {{"path", corpus_path("fig1.kern")}, {"mode", "free"}}}};
    ws.text(true);
    ws.write(asio::buffer(load.dump()));

    beast::flat_buffer buffer;
    ws.read(buffer);
    const auto response = json::parse(beast::buffers_to_string(buffer.data()));
    buffer.consume(buffer.size());
    EXPECT_EQ(response["id"], 1);
    EXPECT_EQ(response["result"]["session"], "s1");

    ws.read(buffer);
    const auto note = json::parse(beast::buffers_to_string(buffer.data()));
    buffer.consume(buffer.size());
    EXPECT_EQ(note["method"], "state_changed");

    ws.write(asio::buffer(std::string("{oops")));
    ws.read(buffer);
    EXPECT_EQ(json::parse(beast::buffers_to_string(buffer.data()))["error"]["code"], error_code::parse_error);
    ws.close(websocket::close_code::normal);
}

TEST(Server, SessionsAreSharedAcrossConnections) {
    Running srv(ServerOptions{});
    auto connect = [&](asio::io_context& ioc) {
        auto ws = std::make_unique<websocket::stream<tcp::socket>>(ioc);
        ws->next_layer().connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), srv.port()));
        ws->handshake("localhost", "/api");
        ws->text(true);
        return ws;
    };
    asio::io_context ioc;
    auto a = connect(ioc);
    auto b = connect(ioc);
    beast::flat_buffer buffer;
    a->write(asio::buffer(json{{"id", 1}, {"method", "load"}, {"params", {{"source", "main() -> ok."}}}}.dump()));
    a->read(buffer);
    buffer.consume(buffer.size());
    b->write(asio::buffer(json{{"id", 2}, {"method", "list_sessions"}}.dump()));
    b->read(buffer);
    EXPECT_EQ(json::parse(beast::buffers_to_string(buffer.data()))["result"]["sessions"].size(), 1u);
}

TEST(Server, ServesStaticFiles) {
    UiDir ui;
    ServerOptions opts;
    opts.ui_root = ui.root;
    Running srv(opts);

    auto index = get(srv.port(), "/");
    EXPECT_EQ(index.result(), http::status::ok);
    EXPECT_EQ(index.body(), "<!doctype html><title>kern</title>");
    EXPECT_EQ(index[http::field::content_type], "text/html; charset=utf-8");

    auto js = get(srv.port(), "/assets/app.js?v=1");
    EXPECT_EQ(js.result(), http::status::ok);
    EXPECT_EQ(js[http::field::content_type], "text/javascript");

    EXPECT_EQ(get(srv.port(), "/missing.css").result(), http::status::not_found);
    EXPECT_EQ(get(srv.port(), "/../secret").result(), http::status::bad_request);
    EXPECT_EQ(get(srv.port(), "/assets/../../x").result(), http::status::bad_request);
}

TEST(Server, WithoutUiBundle) {
    Running srv(ServerOptions{});
    const auto res = get(srv.port(), "/");
    EXPECT_EQ(res.result(), http::status::not_found);
    EXPECT_NE(res.body().find("--ui"), std::string::npos);
}

TEST(Stdio, LineDelimited) {
    Service svc;
    const auto schedule = json::parse(read_text_file(corpus_path("fig1b.sched")));
    const std::string load =
        json{{"id", 1}, {"method", "load"}, {"params", {{"path", corpus_path("fig1.kern")}, {"mode", "record"}, {"schedule", schedule}}}}.dump();
    const std::string until =
        json{{"id", 2}, {"method", "run_until"}, {"params", {{"session", "s1"}, {"target", {{"kind", "rec"}, {"tag", "l1"}}}}}}
            .dump();
    std::istringstream in(load + "\n\n" + until + "\n");
    std::ostringstream out;
    serve_stdio(svc, in, out);

    std::istringstream lines(out.str());
    std::vector<json> msgs;
    for (std::string l; std::getline(lines, l);) msgs.push_back(json::parse(l));
    ASSERT_EQ(msgs.size(), 4u);  // two responses, each followed by a notification
    EXPECT_EQ(msgs[0]["id"], 1);
    EXPECT_EQ(msgs[1]["method"], "state_changed");
    EXPECT_EQ(msgs[2]["id"], 2);
    EXPECT_TRUE(msgs[2]["result"]["reached"].get<bool>());
    EXPECT_EQ(msgs[3]["method"], "state_changed");
}
