#include "rlstruct/service.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <thread>

#include "rlstruct/errors.hpp"

namespace rlstruct {

namespace {

json::Value string_array(const std::vector<std::string>& xs) {
  json::Value arr = json::Value::array();
  for (const auto& x : xs) arr.push_back(x);
  return arr;
}

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

}  // namespace

SchemaRegistry SchemaRegistry::load_dir(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("schema directory " + dir + " does not exist");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  SchemaRegistry reg;
  for (const auto& f : files) reg.add(load_schema_file(f.string()));
  return reg;
}

void SchemaRegistry::add(Schema schema) {
  const std::string name = schema.name;
  if (!schemas_.emplace(name, std::move(schema)).second) {
    throw ConstraintError("duplicate schema name '" + name + "' in registry");
  }
}

const Schema& SchemaRegistry::get(std::string_view name) const {
  const auto it = schemas_.find(name);
  if (it == schemas_.end()) throw UnknownSchema("no registered schema named '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> SchemaRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, s] : schemas_) out.push_back(name);
  return out;
}

json::Value breakdown_to_value(const RewardBreakdown& b) {
  json::Value v = json::Value::object();
  v.set("r_valid", b.r_valid);
  v.set("r_struct", b.r_struct);
  v.set("r_format", b.r_format);
  v.set("r_correct", b.r_correct);
  v.set("r_length", b.r_length);
  v.set("total", b.total);
  return v;
}

json::Value diagnostics_to_value(const RewardBreakdown& b) {
  const RewardFlags& f = b.flags;
  json::Value v = json::Value::object();
  if (f.parse_error) {
    json::Value pe = json::Value::object();
    pe.set("kind", std::string(json::to_string(*f.parse_error)));
    pe.set("offset", static_cast<double>(f.parse_error_offset.value_or(0)));
    v.set("parse_error", std::move(pe));
  } else {
    v.set("parse_error", nullptr);
  }
  v.set("duplicate_keys", f.duplicate_keys);
  v.set("has_fence", f.has_fence);
  v.set("fence_tagged_json", f.fence_tagged_json);
  v.set("has_ground_truth", f.has_ground_truth);
  v.set("length", static_cast<double>(f.length));
  v.set("missing_key_paths", string_array(f.missing_key_paths));
  v.set("hallucinated_key_paths", string_array(f.hallucinated_key_paths));
  v.set("key_path_recall", f.key_path_recall);
  return v;
}

json::Value score_to_value(const RewardBreakdown& b) {
  json::Value v = json::Value::object();
  v.set("breakdown", breakdown_to_value(b));
  v.set("diagnostics", diagnostics_to_value(b));
  return v;
}

RewardConfig apply_reward_overrides(RewardConfig cfg, const json::Value& overrides) {
  if (!overrides.is_object()) throw ConfigError("'config' must be an object");
  for (const auto& [key, val] : overrides.members()) {
    if (!val.is_number()) throw ConfigError("config field '" + key + "' must be a number");
    const double x = val.as_number();
    auto length = [&](std::size_t& slot) {
      if (!val.is_integral() || x < 0) throw ConfigError("config field '" + key + "' must be a non-negative integer");
      slot = static_cast<std::size_t>(x);
    };
    if (key == "w_valid") {
      cfg.w_valid = x;
    } else if (key == "w_struct") {
      cfg.w_struct = x;
    } else if (key == "w_format") {
      cfg.w_format = x;
    } else if (key == "w_correct") {
      cfg.w_correct = x;
    } else if (key == "w_length") {
      cfg.w_length = x;
    } else if (key == "l_min") {
      length(cfg.l_min);
    } else if (key == "l_max") {
      length(cfg.l_max);
    } else if (key == "format_md_bonus") {
      cfg.format_md_bonus = x;
    } else if (key == "format_json_bonus") {
      cfg.format_json_bonus = x;
    } else if (key == "length_penalty") {
      cfg.length_penalty = x;
    } else {
      throw ConfigError("unknown config field '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

json::Value error_response(const json::Value& id, std::string_view code, std::string_view message) {
  json::Value err = json::Value::object();
  err.set("code", std::string(code));
  err.set("message", std::string(message));
  json::Value v = json::Value::object();
  v.set("id", id);
  v.set("error", std::move(err));
  return v;
}

RewardService::RewardService(SchemaRegistry registry, RewardConfig defaults)
    : registry_(std::move(registry)), defaults_(defaults) {
  defaults_.validate();
}

json::Value RewardService::handle(const json::Value& req) const {
  json::Value id(nullptr);
  try {
    if (!req.is_object()) return error_response(id, "BadRequest", "request must be a JSON object");
    if (const json::Value* v = req.find("id")) id = *v;
    if (!id.is_string()) return error_response(id, "BadRequest", "'id' must be a string");
    for (const auto& [key, val] : req.members()) {
      if (key != "id" && key != "schema" && key != "schema_name" && key != "completion" && key != "ground_truth" &&
          key != "config") {
        return error_response(id, "BadRequest", "unknown request field '" + key + "'");
      }
    }
    const json::Value* inline_schema = req.find("schema");
    const json::Value* schema_name = req.find("schema_name");
    if ((inline_schema == nullptr) == (schema_name == nullptr)) {
      return error_response(id, "BadRequest", "exactly one of 'schema' and 'schema_name' is required");
    }
    const json::Value* completion = req.find("completion");
    if (completion == nullptr || !completion->is_string()) {
      return error_response(id, "BadRequest", "'completion' must be a string");
    }
    RewardConfig cfg = defaults_;
    if (const json::Value* overrides = req.find("config")) {
      try {
        cfg = apply_reward_overrides(cfg, *overrides);
      } catch (const ConfigError& e) {
        return error_response(id, "BadRequest", e.what());
      }
    }

    Schema local;
    const Schema* schema = nullptr;
    if (inline_schema != nullptr) {
      if (!inline_schema->is_object()) return error_response(id, "BadRequest", "'schema' must be an object");
      try {
        local = parse_schema(json::serialize(*inline_schema));
      } catch (const Error& e) {
        return error_response(id, "BadRequest", std::string(e.error_class()) + ": " + e.what());
      }
      schema = &local;
    } else {
      if (!schema_name->is_string()) return error_response(id, "BadRequest", "'schema_name' must be a string");
      try {
        schema = &registry_.get(schema_name->as_string());
      } catch (const UnknownSchema& e) {
        return error_response(id, "UnknownSchema", e.what());
      }
    }

    const json::Value* truth = req.find("ground_truth");
    const RewardBreakdown b = reward_total(completion->as_string(), *schema, truth, cfg);
    json::Value resp = json::Value::object();
    resp.set("id", id);
    resp.set("breakdown", breakdown_to_value(b));
    resp.set("diagnostics", diagnostics_to_value(b));
    return resp;
  } catch (const std::exception& e) {
    return error_response(id, "InternalError", e.what());
  }
}

std::string RewardService::handle_line(std::string_view line) const {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.size() > kMaxRequestBytes) {
    return json::serialize(error_response(nullptr, "BadRequest", "request exceeds the size limit"));
  }
  const json::ParseOutcome parsed = json::parse_strict(line);
  if (!parsed.valid) {
    return json::serialize(error_response(nullptr, "BadRequest",
                                          "request is not valid JSON (" +
                                              std::string(json::to_string(*parsed.error_kind)) + " at offset " +
                                              std::to_string(*parsed.error_offset) + ")"));
  }
  return json::serialize(handle(*parsed.value));
}

std::size_t serve_stream(const RewardService& service, std::istream& in, std::ostream& out,
                         const std::atomic<bool>* stop) {
  std::size_t handled = 0;
  std::string line;
  while ((stop == nullptr || !stop->load()) && std::getline(in, line)) {
    out << service.handle_line(line) << '\n' << std::flush;
    ++handled;
  }
  return handled;
}

TcpServer::TcpServer(const RewardService& service) : service_(service) {}

TcpServer::~TcpServer() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

int TcpServer::listen(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port_text = std::to_string(port);
  if (::getaddrinfo(host.empty() ? nullptr : host.c_str(), port_text.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw IoError("cannot resolve listen address " + host);
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw IoError(std::string("socket: ") + std::strerror(errno));
  }
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 64) != 0) {
    const std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    ::close(fd);
    throw IoError("cannot listen on " + host + ":" + port_text + ": " + why);
  }
  ::freeaddrinfo(res);
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
  listen_fd_ = fd;
  return ntohs(bound.sin_port);
}

void TcpServer::run() {
  if (listen_fd_ < 0) throw IoError("TcpServer::run called before listen");
  std::vector<std::thread> workers;
  while (!stopping_.load()) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, 100);
    if (r <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    {
      std::lock_guard<std::mutex> lock(mu_);
      open_fds_.push_back(fd);
    }
    workers.emplace_back([this, fd] { serve_connection(fd); });
  }
  {
    std::lock_guard<std::mutex> lock(mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RD);
  }
  for (auto& w : workers) w.join();
}

void TcpServer::stop() { stopping_.store(true); }

void TcpServer::serve_connection(int fd) {
  std::string buffer;
  std::string out;
  char chunk[65536];
  bool discarding = false;
  bool alive = true;
  while (alive) {
    const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (;;) {
      const std::size_t nl = buffer.find('\n', start);
      if (nl == std::string::npos) break;
      if (discarding) {
        discarding = false;
      } else {
        out += service_.handle_line(std::string_view(buffer).substr(start, nl - start));
        out += '\n';
      }
      start = nl + 1;
    }
    buffer.erase(0, start);
    if (buffer.size() > kMaxRequestBytes && !discarding) {
      out += json::serialize(error_response(nullptr, "BadRequest", "request exceeds the size limit"));
      out += '\n';
      buffer.clear();
      discarding = true;
    } else if (discarding) {
      buffer.clear();
    }
    if (!out.empty()) {
      alive = send_all(fd, out);
      out.clear();
    }
  }
  if (alive && !buffer.empty() && !discarding) {
    send_all(fd, service_.handle_line(buffer) + "\n");
  }
  {
    std::lock_guard<std::mutex> lock(mu_);
    open_fds_.erase(std::remove(open_fds_.begin(), open_fds_.end(), fd), open_fds_.end());
  }
  ::close(fd);
}

}  // namespace rlstruct
