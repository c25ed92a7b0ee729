// POSIX subprocess helpers for the external decoder and sidecar scorers.
// Commands run through /bin/sh -c.

#ifndef VIDCURATE_PROCESS_H_
#define VIDCURATE_PROCESS_H_

#include <chrono>
#include <string>
#include <sys/types.h>

namespace vidcurate {

struct CommandResult {
  int exit_status = -1;  // -1 when killed by a signal
  bool timed_out = false;
  std::string stdout_data;
  std::string stderr_data;
};

// Runs `command` to completion, capturing both output streams. The child is
// killed when `timeout` elapses.
CommandResult RunCommand(const std::string& command,
                         std::chrono::milliseconds timeout);

// Single-quotes `arg` for /bin/sh.
std::string ShellQuote(const std::string& arg);

// A long-running child with line-oriented pipes on stdin/stdout. stderr is
// inherited. The child is killed and reaped on destruction.
class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command);
  ~ChildProcess();

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  // Throws kIo when the pipe is closed.
  void WriteLine(const std::string& line);

  // Reads one line without the trailing newline. Throws kTimeout on timeout
  // and kProtocol on end of stream.
  std::string ReadLine(std::chrono::milliseconds timeout);

  bool Alive();
  const std::string& command() const { return command_; }

 private:
  void Terminate();

  std::string command_;
  pid_t pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  std::string buffer_;
};

}  // namespace vidcurate

#endif  // VIDCURATE_PROCESS_H_
