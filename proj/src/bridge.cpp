#include "flowseries/bridge.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "flowseries/error.hpp"

namespace flowseries {

using nlohmann::json;
using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("forecaster-bridge", msg); }

std::string quote(const std::string& line) {
  constexpr std::size_t kMax = 200;
  return "'" + (line.size() > kMax ? line.substr(0, kMax) + "..." : line) + "'";
}

// Owns a /bin/sh -c child with piped stdin/stdout. The destructor kills and
// reaps a child that is still running.
class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command) {
    struct sigaction sa {};
    sa.sa_handler = SIG_IGN;
    sigaction(SIGPIPE, &sa, nullptr);

    int in_pipe[2], out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0) fail(std::string("pipe: ") + std::strerror(errno));
    if (pipe2(out_pipe, O_CLOEXEC) != 0) {
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      fail(std::string("pipe: ") + std::strerror(errno));
    }
    pid_ = fork();
    if (pid_ < 0) fail(std::string("fork: ") + std::strerror(errno));
    if (pid_ == 0) {
      dup2(in_pipe[0], STDIN_FILENO);
      dup2(out_pipe[1], STDOUT_FILENO);
      execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    stdin_fd_ = in_pipe[1];
    stdout_fd_ = out_pipe[0];
    fcntl(stdin_fd_, F_SETFL, fcntl(stdin_fd_, F_GETFL) | O_NONBLOCK);
    fcntl(stdout_fd_, F_SETFL, fcntl(stdout_fd_, F_GETFL) | O_NONBLOCK);
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() {
    close_stdin();
    if (stdout_fd_ >= 0) ::close(stdout_fd_);
    if (pid_ > 0 && !reaped_) {
      kill(pid_, SIGKILL);
      waitpid(pid_, nullptr, 0);
    }
  }

  int stdin_fd() const noexcept { return stdin_fd_; }
  int stdout_fd() const noexcept { return stdout_fd_; }

  void close_stdin() {
    if (stdin_fd_ >= 0) ::close(stdin_fd_);
    stdin_fd_ = -1;
  }

  // Waits up to `grace` for exit; returns the raw wait status, or nullopt.
  std::optional<int> wait_for(std::chrono::milliseconds grace) {
    const auto deadline = Clock::now() + grace;
    while (true) {
      int status = 0;
      const pid_t r = waitpid(pid_, &status, WNOHANG);
      if (r == pid_) {
        reaped_ = true;
        return status;
      }
      if (Clock::now() >= deadline) return std::nullopt;
      // Keep draining stdout so the child never blocks on a full pipe.
      char buf[4096];
      while (::read(stdout_fd_, buf, sizeof buf) > 0) {
      }
      usleep(2000);
    }
  }

 private:
  pid_t pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  bool reaped_ = false;
};

std::string describe_status(int status) {
  if (WIFEXITED(status)) return "exit status " + std::to_string(WEXITSTATUS(status));
  if (WIFSIGNALED(status)) return "killed by signal " + std::to_string(WTERMSIG(status));
  return "wait status " + std::to_string(status);
}

}  // namespace

std::string format_level(double level) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, level);
  return {buf, r.ptr};
}

std::string encode_request(const ForecastRequest& r) {
  ordered_json j;
  j["id"] = r.id;
  j["context"] = r.context;
  j["horizon"] = r.horizon;
  j["quantiles"] = r.quantile_levels;
  return j.dump();
}

ForecastRequest decode_request(const std::string& line) {
  try {
    const json j = json::parse(line);
    ForecastRequest r;
    r.id = j.at("id").get<std::string>();
    r.context = j.at("context").get<std::vector<double>>();
    r.horizon = j.at("horizon").get<int>();
    r.quantile_levels = j.at("quantiles").get<std::vector<double>>();
    if (r.horizon < 1) fail("horizon must be >= 1 in request " + quote(line));
    for (std::size_t i = 0; i < r.quantile_levels.size(); ++i) {
      const double q = r.quantile_levels[i];
      if (!(q > 0.0 && q < 1.0) || (i && !(q > r.quantile_levels[i - 1])))
        fail("quantile levels must be strictly increasing in (0, 1) in request " + quote(line));
    }
    return r;
  } catch (const json::exception& e) {
    fail(std::string("malformed request line ") + quote(line) + ": " + e.what());
  }
}

std::string encode_response(const ForecastResponse& r) {
  ordered_json j;
  j["id"] = r.id;
  j["point"] = r.result.point;
  ordered_json q = ordered_json::object();
  for (const auto& qf : r.result.quantiles) q[format_level(qf.level)] = qf.values;
  j["quantiles"] = q;
  return j.dump();
}

ForecastResponse decode_response(const std::string& line) {
  try {
    const json j = json::parse(line);
    if (!j.is_object()) fail("malformed response line " + quote(line) + ": not an object");
    ForecastResponse r;
    r.id = j.at("id").get<std::string>();
    r.result.point = j.at("point").get<std::vector<double>>();
    const auto& q = j.at("quantiles");
    if (!q.is_object()) fail("malformed response line " + quote(line) + ": quantiles must be an object");
    for (const auto& [key, values] : q.items()) {
      double level = 0.0;
      const auto res = std::from_chars(key.data(), key.data() + key.size(), level);
      if (res.ec != std::errc{} || res.ptr != key.data() + key.size())
        fail("malformed response line " + quote(line) + ": bad quantile key '" + key + "'");
      r.result.quantiles.push_back({level, values.get<std::vector<double>>()});
    }
    std::sort(r.result.quantiles.begin(), r.result.quantiles.end(),
              [](const auto& a, const auto& b) { return a.level < b.level; });
    return r;
  } catch (const json::exception& e) {
    fail(std::string("malformed response line ") + quote(line) + ": " + e.what());
  }
}

BridgeForecaster::BridgeForecaster(BridgeOptions options) : options_(std::move(options)) {
  if (options_.command.empty()) fail("empty forecaster command");
  if (options_.max_in_flight < 1) fail("max-in-flight must be >= 1");
  name_ = options_.name.empty() ? "cmd:" + options_.command : options_.name;
}

std::vector<std::optional<ForecastResult>> BridgeForecaster::forecast(
    std::span<const ForecastRequest> requests) {
  std::vector<std::optional<ForecastResult>> out(requests.size());
  stats_ = {};
  if (requests.empty()) return out;

  std::map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < requests.size(); ++i)
    if (!index_of.emplace(requests[i].id, i).second) fail("duplicate request id " + requests[i].id);

  ChildProcess child(options_.command);
  struct Pending {
    std::size_t index;
    Clock::time_point deadline;
  };
  std::map<std::string, Pending> in_flight;
  std::set<std::string> expired;
  std::set<std::string> answered;
  std::size_t next = 0;
  std::string outbuf;
  std::string inbuf;
  bool child_eof = false;

  auto resolved = [&] { return next == requests.size() && outbuf.empty() && in_flight.empty(); };

  auto handle_line = [&](const std::string& line) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) return;
    ForecastResponse resp = decode_response(line);
    const auto it = in_flight.find(resp.id);
    if (it == in_flight.end()) {
      if (expired.count(resp.id)) return;  // late answer to a timed-out request
      if (answered.count(resp.id)) fail("duplicate response for id " + resp.id);
      fail("response for unknown id " + quote(resp.id));
    }
    const ForecastRequest& rq = requests[it->second.index];
    try {
      validate_forecast(resp.result, static_cast<std::size_t>(rq.horizon), rq.quantile_levels);
    } catch (const Error& e) {
      fail("invalid response for id " + resp.id + ": " + e.what());
    }
    out[it->second.index] = std::move(resp.result);
    answered.insert(it->first);
    in_flight.erase(it);
    ++stats_.answered;
  };

  while (!resolved()) {
    while (outbuf.empty() && next < requests.size() &&
           static_cast<int>(in_flight.size()) < options_.max_in_flight) {
      outbuf = encode_request(requests[next]) + "\n";
      in_flight[requests[next].id] = {next, Clock::now() + options_.timeout};
      ++next;
      ++stats_.sent;
    }
    // End of stream lets batching children flush what they still hold.
    if (next == requests.size() && outbuf.empty()) child.close_stdin();
    if (child_eof)
      fail("forecaster exited before answering " + std::to_string(in_flight.size()) +
           " pending request(s)" +
           [&] {
             const auto st = child.wait_for(options_.exit_grace);
             return st ? " (" + describe_status(*st) + ")" : std::string();
           }());

    pollfd fds[2];
    nfds_t nfds = 0;
    fds[nfds++] = {child.stdout_fd(), POLLIN, 0};
    if (!outbuf.empty()) fds[nfds++] = {child.stdin_fd(), POLLOUT, 0};

    auto wait = std::chrono::milliseconds(1000);
    const auto now = Clock::now();
    for (const auto& [id, p] : in_flight)
      wait = std::min(wait, std::chrono::duration_cast<std::chrono::milliseconds>(p.deadline - now) +
                                std::chrono::milliseconds(1));
    wait = std::max(wait, std::chrono::milliseconds(0));
    const int rc = poll(fds, nfds, static_cast<int>(wait.count()));
    if (rc < 0 && errno != EINTR) fail(std::string("poll: ") + std::strerror(errno));

    if (rc > 0 && nfds > 1 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t w = ::write(child.stdin_fd(), outbuf.data(), outbuf.size());
      if (w > 0) {
        outbuf.erase(0, static_cast<std::size_t>(w));
      } else if (w < 0 && errno != EAGAIN && errno != EINTR) {
        child_eof = true;  // EPIPE: child closed its input
      }
    }
    if (rc > 0 && (fds[0].revents & (POLLIN | POLLHUP | POLLERR))) {
      char buf[65536];
      while (true) {
        const ssize_t r = ::read(child.stdout_fd(), buf, sizeof buf);
        if (r > 0) {
          inbuf.append(buf, static_cast<std::size_t>(r));
          continue;
        }
        if (r == 0) child_eof = true;
        break;
      }
      std::size_t pos;
      while ((pos = inbuf.find('\n')) != std::string::npos) {
        const std::string line = inbuf.substr(0, pos);
        inbuf.erase(0, pos + 1);
        handle_line(line);
      }
    }

    const auto after = Clock::now();
    for (auto it = in_flight.begin(); it != in_flight.end();) {
      if (after >= it->second.deadline) {
        expired.insert(it->first);
        ++stats_.timed_out;
        it = in_flight.erase(it);
      } else {
        ++it;
      }
    }
    if (child_eof && resolved()) break;
  }

  child.close_stdin();
  const auto status = child.wait_for(options_.exit_grace);
  if (!status) fail("forecaster did not exit within " + std::to_string(options_.exit_grace.count()) +
                    " ms after its input was closed");
  if (!WIFEXITED(*status) || WEXITSTATUS(*status) != 0)
    fail("forecaster " + quote(options_.command) + " failed: " + describe_status(*status));
  return out;
}

}  // namespace flowseries
