#pragma once

// Line-delimited JSON scoring service. Each request line yields exactly one
// response line; see docs/protocol.md for the wire format.

#include <atomic>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "rlstruct/json.hpp"
#include "rlstruct/reward.hpp"
#include "rlstruct/schema.hpp"

namespace rlstruct {

// Named schemas, loaded once and immutable afterwards.
class SchemaRegistry {
 public:
  SchemaRegistry() = default;
  // Loads every *.json file in `dir`, keyed by the schema's own name. Throws
  // on any file that fails to parse, or on duplicate names.
  static SchemaRegistry load_dir(const std::string& dir);
  void add(Schema schema);
  // Throws UnknownSchema.
  const Schema& get(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, Schema, std::less<>> schemas_;
};

// Breakdown and diagnostics objects shared by the service and the CLI.
json::Value breakdown_to_value(const RewardBreakdown& b);
json::Value diagnostics_to_value(const RewardBreakdown& b);
// {"breakdown": ..., "diagnostics": ...}
json::Value score_to_value(const RewardBreakdown& b);

// Applies a partial RewardConfig given as {"w_valid": 1.0, ...}. Throws
// ConfigError for unknown keys, wrong types or an invalid result.
RewardConfig apply_reward_overrides(RewardConfig base, const json::Value& overrides);

class RewardService {
 public:
  RewardService(SchemaRegistry registry, RewardConfig defaults = {});

  // Never throws: failures become error responses.
  json::Value handle(const json::Value& request) const;
  std::string handle_line(std::string_view line) const;

  const SchemaRegistry& registry() const { return registry_; }

 private:
  SchemaRegistry registry_;
  RewardConfig defaults_;
};

json::Value error_response(const json::Value& id, std::string_view code, std::string_view message);

// Reads request lines until end of input or until `stop` becomes true,
// writing one flushed response line per request. Returns the number handled.
std::size_t serve_stream(const RewardService& service, std::istream& in, std::ostream& out,
                         const std::atomic<bool>* stop = nullptr);

// TCP transport: one thread per connection, FIFO per connection.
class TcpServer {
 public:
  explicit TcpServer(const RewardService& service);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  // Binds and listens; port 0 picks a free port. Returns the bound port.
  // Throws IoError.
  int listen(const std::string& host, int port);
  // Accepts connections until stop(); then waits for open connections to
  // drain after shutting down their read side.
  void run();
  // Safe to call from another thread.
  void stop();

 private:
  void serve_connection(int fd);

  const RewardService& service_;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::vector<int> open_fds_;
};

inline constexpr std::size_t kMaxRequestBytes = 16u << 20;

}  // namespace rlstruct
