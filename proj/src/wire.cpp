#include "sensel/wire.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>

#include "json.hpp"

#include "sensel/errors.hpp"

namespace sensel::wire {
namespace {

using nlohmann::json;

// nlohmann's dump() picks the shortest round-trip form; records require 17
// significant digits, so numbers are emitted by hand.
void write_json(const json& value, std::string& out) {
  switch (value.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = value.begin(); it != value.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += json(it.key()).dump();
        out += ':';
        write_json(it.value(), out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& item : value) {
        if (!first) out += ',';
        first = false;
        write_json(item, out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float: {
      const double x = value.get<double>();
      if (!std::isfinite(x)) throw InvalidInput("encode: non-finite number");
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", x);
      out += buf;
      if (std::strpbrk(buf, ".eEn") == nullptr) out += ".0";
      break;
    }
    default:
      out += value.dump();
  }
}

json encode_matrix(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(static_cast<double>(m(r, c)));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

json encode_vector(const Vector& v) {
  json data = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(static_cast<double>(v(i)));
  return data;
}

json encode_sensor(const SensorModel& s) {
  return {{"id", s.id},
          {"obs_matrix", encode_matrix(s.obs_matrix)},
          {"noise_cov", encode_matrix(s.noise_cov)},
          {"cost", s.cost},
          {"onboard", s.is_onboard}};
}

json encode_belief(const GaussianBelief& b) {
  return {{"mean", encode_vector(b.mean)}, {"cov", encode_matrix(b.cov)}};
}

struct PayloadVisitor {
  json operator()(const smc::MessageA& m) const {
    json sensors = json::array();
    for (const auto& s : m.onboard_sensors) sensors.push_back(encode_sensor(s));
    return {{"onboard_sensors", std::move(sensors)},
            {"onboard_measurements", encode_vector(m.onboard_measurements)},
            {"prior", encode_belief(m.prior)},
            {"requested_level", m.requested_level}};
  }
  json operator()(const smc::MessageB& m) const {
    return {{"posterior", encode_belief(m.posterior)},
            {"total_cost", m.total_cost},
            {"certified_bounds", encode_vector(m.certified_bounds)},
            {"feasible", m.feasible}};
  }
  json operator()(const smc::MessageC& m) const {
    json entries = json::array();
    for (const auto& e : m.entries) {
      entries.push_back({{"sensor", encode_sensor(e.sensor)},
                         {"measurement", encode_vector(e.measurement)}});
    }
    return {{"entries", std::move(entries)}};
  }
  json operator()(const smc::EndOfService&) const { return json::object(); }
};

const char* tag_of(const Message& msg) {
  static constexpr const char* kTags[] = {"A", "B", "C", "END"};
  return kTags[msg.index()];
}

// Payload schema errors carry the payload's start offset.
class PayloadReader {
 public:
  explicit PayloadReader(std::size_t offset) : offset_(offset) {}

  [[noreturn]] void fail(const std::string& what) const { throw DecodeError(what, offset_); }

  const json& field(const json& obj, const char* key) const {
    if (!obj.is_object()) fail("expected object while reading '" + std::string(key) + "'");
    auto it = obj.find(key);
    if (it == obj.end()) fail(std::string("missing field '") + key + "'");
    return *it;
  }

  double number(const json& v, const char* what) const {
    if (!v.is_number()) fail(std::string("expected number for ") + what);
    return v.get<double>();
  }

  Eigen::Index index(const json& v, const char* what) const {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      fail(std::string("expected nonnegative integer for ") + what);
    }
    return static_cast<Eigen::Index>(v.get<long long>());
  }

  Vector vector(const json& v, const char* what) const {
    if (!v.is_array()) fail(std::string("expected array for ") + what);
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      out(static_cast<Eigen::Index>(i)) = number(v[i], what);
    }
    return out;
  }

  Matrix matrix(const json& v, const char* what) const {
    const auto rows = index(field(v, "rows"), what);
    const auto cols = index(field(v, "cols"), what);
    const auto& data = field(v, "data");
    if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
      fail(std::string("matrix data size mismatch for ") + what);
    }
    Matrix out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        out(r, c) = number(data[static_cast<std::size_t>(r * cols + c)], what);
      }
    }
    return out;
  }

  SensorModel sensor(const json& v) const {
    SensorModel s;
    const auto& id = field(v, "id");
    if (!id.is_string()) fail("sensor id must be a string");
    s.id = id.get<std::string>();
    s.obs_matrix = matrix(field(v, "obs_matrix"), "obs_matrix");
    s.noise_cov = matrix(field(v, "noise_cov"), "noise_cov");
    s.cost = number(field(v, "cost"), "cost");
    const auto& onboard = field(v, "onboard");
    if (!onboard.is_boolean()) fail("sensor 'onboard' must be boolean");
    s.is_onboard = onboard.get<bool>();
    return s;
  }

  GaussianBelief belief(const json& v) const {
    return {vector(field(v, "mean"), "mean"), matrix(field(v, "cov"), "cov")};
  }

  bool boolean(const json& v, const char* what) const {
    if (!v.is_boolean()) fail(std::string("expected boolean for ") + what);
    return v.get<bool>();
  }

  Message decode(const std::string& tag, const json& p) const {
    if (tag == "A") {
      smc::MessageA m;
      const auto& sensors = field(p, "onboard_sensors");
      if (!sensors.is_array()) fail("onboard_sensors must be an array");
      for (const auto& s : sensors) m.onboard_sensors.push_back(sensor(s));
      m.onboard_measurements = vector(field(p, "onboard_measurements"), "onboard_measurements");
      m.prior = belief(field(p, "prior"));
      const auto& level = field(p, "requested_level");
      if (!level.is_number_integer()) fail("requested_level must be an integer");
      m.requested_level = level.get<LevelId>();
      return m;
    }
    if (tag == "B") {
      smc::MessageB m;
      m.posterior = belief(field(p, "posterior"));
      m.total_cost = number(field(p, "total_cost"), "total_cost");
      m.certified_bounds = vector(field(p, "certified_bounds"), "certified_bounds");
      m.feasible = boolean(field(p, "feasible"), "feasible");
      return m;
    }
    if (tag == "C") {
      smc::MessageC m;
      const auto& entries = field(p, "entries");
      if (!entries.is_array()) fail("entries must be an array");
      for (const auto& e : entries) {
        m.entries.push_back({sensor(field(e, "sensor")),
                             vector(field(e, "measurement"), "measurement")});
      }
      return m;
    }
    return smc::EndOfService{};
  }

 private:
  std::size_t offset_;
};

}  // namespace

std::string encode_message(const Message& msg) {
  json payload = std::visit(PayloadVisitor{}, msg);
  std::string body;
  write_json(payload, body);
  std::string out = "SMC/" + std::to_string(kSchemaVersion) + " " + tag_of(msg) + " " +
                    std::to_string(body.size()) + "\n";
  out += body;
  out += '\n';
  return out;
}

Message decode_next(std::string_view bytes, std::size_t& offset) {
  const std::size_t start = offset;
  const auto eol = bytes.find('\n', start);
  if (eol == std::string_view::npos) throw DecodeError("truncated record header", bytes.size());
  const std::string_view header = bytes.substr(start, eol - start);

  if (header.substr(0, 4) != "SMC/") throw DecodeError("bad record magic", start);
  const auto sp1 = header.find(' ');
  const auto sp2 = sp1 == std::string_view::npos ? sp1 : header.find(' ', sp1 + 1);
  if (sp2 == std::string_view::npos) throw DecodeError("malformed record header", start);

  int version = 0;
  const auto vtext = header.substr(4, sp1 - 4);
  if (auto [p, ec] = std::from_chars(vtext.data(), vtext.data() + vtext.size(), version);
      ec != std::errc() || p != vtext.data() + vtext.size()) {
    throw DecodeError("malformed schema version", start + 4);
  }
  if (version != kSchemaVersion) {
    throw DecodeError("unsupported schema version " + std::to_string(version), start + 4);
  }
  const std::string tag(header.substr(sp1 + 1, sp2 - sp1 - 1));
  if (tag != "A" && tag != "B" && tag != "C" && tag != "END") {
    throw DecodeError("unknown message tag '" + tag + "'", start + sp1 + 1);
  }
  std::size_t length = 0;
  const auto ltext = header.substr(sp2 + 1);
  if (auto [p, ec] = std::from_chars(ltext.data(), ltext.data() + ltext.size(), length);
      ec != std::errc() || p != ltext.data() + ltext.size()) {
    throw DecodeError("malformed payload length", start + sp2 + 1);
  }

  const std::size_t body_at = eol + 1;
  if (bytes.size() < body_at + length + 1) {
    throw DecodeError("truncated payload: need " + std::to_string(length + 1) + " bytes, have " +
                          std::to_string(bytes.size() - body_at),
                      bytes.size());
  }
  if (bytes[body_at + length] != '\n') {
    throw DecodeError("missing record terminator", body_at + length);
  }
  json payload;
  try {
    payload = json::parse(bytes.substr(body_at, length));
  } catch (const json::parse_error& e) {
    throw DecodeError(std::string("invalid payload: ") + e.what(),
                      body_at + (e.byte > 0 ? e.byte - 1 : 0));
  }
  if (!payload.is_object()) throw DecodeError("payload is not an object", body_at);
  Message out = PayloadReader(body_at).decode(tag, payload);
  offset = body_at + length + 1;
  return out;
}

Message decode_message(std::string_view bytes) {
  std::size_t offset = 0;
  Message msg = decode_next(bytes, offset);
  if (offset != bytes.size()) throw DecodeError("trailing bytes after record", offset);
  return msg;
}

std::string frame(std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw InvalidInput("frame: payload too large");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out += static_cast<char>(n >> 24 & 0xFF);
  out += static_cast<char>(n >> 16 & 0xFF);
  out += static_cast<char>(n >> 8 & 0xFF);
  out += static_cast<char>(n & 0xFF);
  out += payload;
  return out;
}

std::optional<std::string> FrameReader::next() {
  if (buffer_.size() < 4) return std::nullopt;
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n = n << 8 | static_cast<unsigned char>(buffer_[i]);
  if (n > kMaxFrameBytes) throw DecodeError("frame length exceeds limit", 0);
  if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  std::string payload = buffer_.substr(4, n);
  buffer_.erase(0, 4 + static_cast<std::size_t>(n));
  return payload;
}

std::uint64_t serve(Channel& channel, const ServiceLevelTable& levels, smc::Solver solver) {
  smc::Session session("wire", levels, solver);
  FrameReader reader;
  auto next_message = [&]() -> std::optional<Message> {
    for (;;) {
      if (auto payload = reader.next()) return decode_message(*payload);
      std::string chunk = channel.read();
      if (chunk.empty()) {
        if (reader.buffered() != 0) throw DecodeError("stream ended inside a frame", 0);
        return std::nullopt;
      }
      reader.feed(chunk);
    }
  };

  while (session.is_open()) {
    auto first = next_message();
    if (!first || std::holds_alternative<smc::EndOfService>(*first)) break;
    auto* a = std::get_if<smc::MessageA>(&*first);
    if (a == nullptr) throw ProtocolError("expected Message A at start of step");
    auto second = next_message();
    if (!second) throw ProtocolError("stream ended before Message C");
    auto* c = std::get_if<smc::MessageC>(&*second);
    if (c == nullptr) throw ProtocolError("expected Message C after Message A");
    const auto result = session.process(*a, *c);
    channel.write(frame(encode_message(result.reply)));
  }
  session.close();
  return session.step_counter();
}

void serve_tcp(std::uint16_t port, const ServiceLevelTable& levels, smc::Solver solver,
               std::size_t max_sessions, const std::function<void(std::uint16_t)>& on_listening) {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  struct Closer {
    int fd;
    ~Closer() { ::close(fd); }
  } guard{listener};

  const int yes = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listener, 4) != 0) {
    throw std::runtime_error(std::string("bind/listen: ") + std::strerror(errno));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_listening) on_listening(ntohs(addr.sin_port));

  for (std::size_t handled = 0; max_sessions == 0 || handled < max_sessions; ++handled) {
    const int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0) throw std::runtime_error(std::string("accept: ") + std::strerror(errno));
    Closer conn{fd};
    Channel channel{
        [fd]() {
          char buf[4096];
          const auto n = ::recv(fd, buf, sizeof buf, 0);
          return n > 0 ? std::string(buf, static_cast<std::size_t>(n)) : std::string();
        },
        [fd](std::string_view data) {
          std::size_t sent = 0;
          while (sent < data.size()) {
            const auto n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
            if (n <= 0) throw std::runtime_error("send failed");
            sent += static_cast<std::size_t>(n);
          }
        }};
    try {
      serve(channel, levels, solver);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "session error: %s\n", e.what());
    }
  }
}

}  // namespace sensel::wire
