#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rlstruct/errors.hpp"
#include "rlstruct/service.hpp"

using namespace rlstruct;
namespace fs = std::filesystem;

namespace {

const std::string kRoot = RLSTRUCT_SOURCE_DIR;

const RewardService& service() {
  static const RewardService s(SchemaRegistry::load_dir(kRoot + "/schemas"));
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream b;
  b << in.rdbuf();
  return b.str();
}

std::string request(int i, const std::string& schema = "flat_qa") {
  return R"({"id":"q)" + std::to_string(i) + R"(","schema_name":")" + schema +
         R"(","completion":"```json\n{\"reasoning\":\"r)" + std::to_string(i % 7) +
         R"(\",\"answer\":\"a\"}\n```","ground_truth":{"reasoning":"r1","answer":"a"}})";
}

int connect_to(int port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
  return fd;
}

void send_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    REQUIRE(n > 0);
    off += static_cast<std::size_t>(n);
  }
}

std::vector<std::string> read_lines(int fd, std::size_t count) {
  std::vector<std::string> lines;
  std::string buf;
  char chunk[65536];
  while (lines.size() < count) {
    const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n <= 0) break;
    buf.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buf.find('\n')) != std::string::npos) {
      lines.push_back(buf.substr(0, nl));
      buf.erase(0, nl + 1);
    }
  }
  return lines;
}

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("golden request and response pairs") {
    int pairs = 0;
    for (const auto& e : fs::directory_iterator(kRoot + "/tests/fixtures/protocol")) {
      const std::string name = e.path().filename().string();
      const auto pos = name.find(".request.jsonl");
      if (pos == std::string::npos) continue;
      const fs::path expected = e.path().parent_path() / (name.substr(0, pos) + ".response.jsonl");
      std::istringstream in(slurp(e.path()));
      std::ostringstream out;
      serve_stream(service(), in, out);
      INFO(name);
      CHECK(out.str() == slurp(expected));
      ++pairs;
    }
    CHECK(pairs >= 10);
  }

  TEST_CASE("perfect completion totals 2.9") {
    const std::string line =
        R"({"id":"p","schema_name":"recipe","completion":"```json\n{\"recipe\":\"stew\",\"ingredients\":[{\"item\":\"salt\",\"amount\":2}],\"steps\":[\"boil\"]}\n```","ground_truth":{"recipe":"stew","ingredients":[{"item":"salt","amount":2}],"steps":["boil"]}})";
    const auto resp = json::parse_strict(service().handle_line(line));
    REQUIRE(resp.valid);
    CHECK(resp.value->find("breakdown")->find("total")->as_number() == doctest::Approx(2.9).epsilon(1e-12));
  }

  TEST_CASE("10,000 pipelined requests come back in order") {
    std::string input;
    for (int i = 0; i < 10000; ++i) input += (i == 4321 ? request(i, "nope") : request(i)) + "\n";
    std::istringstream in(input);
    std::ostringstream out;
    CHECK(serve_stream(service(), in, out) == 10000);
    std::istringstream lines(out.str());
    std::string line;
    int i = 0;
    while (std::getline(lines, line)) {
      const auto v = json::parse_strict(line);
      REQUIRE(v.valid);
      CHECK(v.value->find("id")->as_string() == "q" + std::to_string(i));
      if (i == 4321) {
        CHECK(v.value->find("error")->find("code")->as_string() == "UnknownSchema");
      } else {
        CHECK(v.value->find("breakdown") != nullptr);
      }
      ++i;
    }
    CHECK(i == 10000);
  }

  TEST_CASE("malformed lines never end the session") {
    std::istringstream in("\n{\"id\":\n[]\n" + request(1) + "\n");
    std::ostringstream out;
    CHECK(serve_stream(service(), in, out) == 4);
    std::istringstream lines(out.str());
    std::vector<std::string> got;
    for (std::string l; std::getline(lines, l);) got.push_back(l);
    REQUIRE(got.size() == 4);
    for (int i = 0; i < 3; ++i) CHECK(got[i].find("\"BadRequest\"") != std::string::npos);
    CHECK(got[3] == service().handle_line(request(1)));
  }

  TEST_CASE("oversized requests are refused") {
    const std::string big = "{\"id\":\"x\",\"completion\":\"" + std::string(kMaxRequestBytes, 'a') + "\"}";
    const std::string resp = service().handle_line(big);
    CHECK(resp.find("\"BadRequest\"") != std::string::npos);
    CHECK(resp.find("size limit") != std::string::npos);
  }

  TEST_CASE("response totals are the weighted sum of the breakdown") {
    const std::string line =
        R"({"id":"w","schema_name":"math","completion":"{\"reasoning\":{\"operation\":\"add\",\"left\":1},\"answer\":3}","ground_truth":{"reasoning":{"operation":"add","left":1,"right":2},"answer":3},"config":{"w_valid":0.7,"w_correct":1.3}})";
    const auto v = *json::parse_strict(service().handle_line(line)).value;
    const auto& b = *v.find("breakdown");
    const double sum = 0.7 * b.find("r_valid")->as_number() + 1.0 * b.find("r_struct")->as_number() +
                       0.5 * b.find("r_format")->as_number() + 1.3 * b.find("r_correct")->as_number() +
                       0.1 * b.find("r_length")->as_number();
    CHECK(b.find("total")->as_number() == sum);
  }

  TEST_CASE("registry") {
    const auto names = service().registry().names();
    CHECK(names == std::vector<std::string>{"flat_qa", "math", "recipe"});
    CHECK_THROWS_AS(service().registry().get("nope"), UnknownSchema);
    SchemaRegistry r;
    r.add(service().registry().get("math"));
    CHECK_THROWS(r.add(service().registry().get("math")));
  }

  TEST_CASE("tcp transport") {
    TcpServer server(service());
    const int port = server.listen("127.0.0.1", 0);
    REQUIRE(port > 0);
    std::thread runner([&] { server.run(); });

    const int a = connect_to(port);
    const int b = connect_to(port);
    std::string batch;
    for (int i = 0; i < 100; ++i) batch += (i == 50 ? request(i, "nope") : request(i)) + "\n";
    send_all(a, batch);
    send_all(b, request(7) + "\n");
    const auto got_b = read_lines(b, 1);
    const auto got_a = read_lines(a, 100);
    REQUIRE(got_a.size() == 100);
    for (int i = 0; i < 100; ++i) {
      CHECK(got_a[i] == service().handle_line(i == 50 ? request(i, "nope") : request(i)));
    }
    REQUIRE(got_b.size() == 1);
    CHECK(got_b[0] == service().handle_line(request(7)));
    ::close(a);
    ::close(b);

    server.stop();
    runner.join();
  }

  TEST_CASE("throughput") {
    std::string input;
    const int n = 20000;
    for (int i = 0; i < n; ++i) input += request(i) + "\n";
    std::istringstream in(input);
    std::ostringstream out;
    const auto t0 = std::chrono::steady_clock::now();
    serve_stream(service(), in, out);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double rate = n / secs;
    MESSAGE("service throughput: " << static_cast<long>(rate) << " scores/s");
    WARN(rate >= 5000.0);
  }
}
