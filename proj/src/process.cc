#include "vidcurate/process.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <vector>

#include "vidcurate/core.h"

namespace vidcurate {

namespace {

using Clock = std::chrono::steady_clock;

// Close-on-exec from creation so concurrent spawns never leak descriptors.
void MakePipe(int fds[2]) {
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    throw Error(ErrorKind::kIo, std::string("pipe: ") + std::strerror(errno));
  }
}

// Forks /bin/sh -c command with the given fds dup'ed onto 0/1/2 (-1 keeps
// the parent's descriptor).
pid_t Spawn(const std::string& command, int in_fd, int out_fd, int err_fd) {
  pid_t pid = ::fork();
  if (pid < 0) {
    throw Error(ErrorKind::kIo, std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    // Own process group, so a kill also reaches anything the shell spawned.
    ::setpgid(0, 0);
    if (in_fd >= 0) ::dup2(in_fd, STDIN_FILENO);
    if (out_fd >= 0) ::dup2(out_fd, STDOUT_FILENO);
    if (err_fd >= 0) ::dup2(err_fd, STDERR_FILENO);
    ::signal(SIGPIPE, SIG_DFL);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  // Also set from the parent so a kill right after fork cannot miss.
  ::setpgid(pid, pid);
  return pid;
}

int DecodeStatus(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -1;
}

}  // namespace

std::string ShellQuote(const std::string& arg) {
  std::string out = "'";
  for (char c : arg) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += "'";
  return out;
}

CommandResult RunCommand(const std::string& command,
                         std::chrono::milliseconds timeout) {
  int out_pipe[2];
  int err_pipe[2];
  MakePipe(out_pipe);
  MakePipe(err_pipe);
  int devnull = ::open("/dev/null", O_RDONLY | O_CLOEXEC);
  pid_t pid = Spawn(command, devnull, out_pipe[1], err_pipe[1]);
  if (devnull >= 0) ::close(devnull);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);

  CommandResult result;
  const auto deadline = Clock::now() + timeout;
  std::vector<pollfd> fds = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
  char buf[65536];
  int open_streams = 2;
  while (open_streams > 0) {
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - Clock::now());
    if (remaining.count() <= 0) {
      result.timed_out = true;
      break;
    }
    int rc = ::poll(fds.data(), fds.size(), static_cast<int>(remaining.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (std::size_t i = 0; i < fds.size(); ++i) {
      if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      ssize_t n = ::read(fds[i].fd, buf, sizeof(buf));
      if (n > 0) {
        (i == 0 ? result.stdout_data : result.stderr_data).append(buf, n);
      } else if (n == 0 || errno != EINTR) {
        ::close(fds[i].fd);
        fds[i].fd = -1;
        --open_streams;
      }
    }
  }
  if (result.timed_out) ::kill(-pid, SIGKILL);
  for (auto& p : fds) {
    if (p.fd >= 0) ::close(p.fd);
  }
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  result.exit_status = DecodeStatus(status);
  return result;
}

ChildProcess::ChildProcess(const std::string& command) : command_(command) {
  // A sidecar that dies mid-request must surface as a write error.
  static std::once_flag ignore_sigpipe;
  std::call_once(ignore_sigpipe, [] { ::signal(SIGPIPE, SIG_IGN); });
  int in_pipe[2];
  int out_pipe[2];
  MakePipe(in_pipe);
  MakePipe(out_pipe);
  pid_ = Spawn(command, in_pipe[0], out_pipe[1], -1);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  stdin_fd_ = in_pipe[1];
  stdout_fd_ = out_pipe[0];
}

ChildProcess::~ChildProcess() { Terminate(); }

void ChildProcess::Terminate() {
  if (stdin_fd_ >= 0) ::close(stdin_fd_);
  if (stdout_fd_ >= 0) ::close(stdout_fd_);
  stdin_fd_ = stdout_fd_ = -1;
  if (pid_ > 0) {
    ::kill(-pid_, SIGKILL);
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    pid_ = -1;
  }
}

void ChildProcess::WriteLine(const std::string& line) {
  std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::write(stdin_fd_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorKind::kIo, "write to '" + command_ + "' failed: " +
                                      std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string ChildProcess::ReadLine(std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  char buf[4096];
  for (;;) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - Clock::now());
    if (remaining.count() <= 0) {
      throw Error(ErrorKind::kTimeout, "no response from '" + command_ + "'");
    }
    pollfd p{stdout_fd_, POLLIN, 0};
    int rc = ::poll(&p, 1, static_cast<int>(remaining.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc == 0) continue;
    ssize_t n = ::read(stdout_fd_, buf, sizeof(buf));
    if (n > 0) {
      buffer_.append(buf, n);
    } else if (n == 0) {
      throw Error(ErrorKind::kProtocol, "'" + command_ + "' closed its output");
    } else if (errno != EINTR) {
      throw Error(ErrorKind::kIo, std::string("read: ") + std::strerror(errno));
    }
  }
}

bool ChildProcess::Alive() {
  if (pid_ <= 0) return false;
  int status = 0;
  pid_t r = ::waitpid(pid_, &status, WNOHANG);
  if (r == pid_) {
    pid_ = -1;
    return false;
  }
  return true;
}

}  // namespace vidcurate
