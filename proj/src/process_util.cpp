#include "aginglab/process_util.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <malloc.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <time.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <thread>

#include "aginglab/error.hpp"

namespace aginglab {

void pin_allocator_thresholds() {
#if defined(__GLIBC__)
  ::mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
  ::mallopt(M_MMAP_THRESHOLD, 64 * 1024 * 1024);
  // two arenas at most: a lazily created per-thread arena mid-run is a
  // one-page rss step, and against an otherwise flat footprint a single
  // step decides the trend test
  ::mallopt(M_ARENA_MAX, 2);
#endif
}

void preheat_allocator_arena() {
  constexpr std::size_t kScratch = 8 * 1024 * 1024;
  char* scratch = static_cast<char*>(::malloc(kScratch));
  if (scratch) {
    for (std::size_t i = 0; i < kScratch; i += 4096) scratch[i] = 1;
    ::free(scratch);
  }
}

void stabilize_process_footprint() {
  pin_allocator_thresholds();
  preheat_allocator_arena();
}

std::string self_exe_path() {
  char buf[4096];
  const ssize_t len = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (len <= 0) throw Error("spawn-failed", "cannot resolve /proc/self/exe");
  buf[len] = '\0';
  return std::string(buf);
}

namespace {

int spawn_with_output(const std::vector<std::string>& argv,
                      const char* output_path) {
  if (argv.empty()) throw Error("spawn-failed", "empty argv");
  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  const int pid = ::fork();
  if (pid < 0) throw Error("spawn-failed", std::strerror(errno));
  if (pid == 0) {
    if (output_path) {
      const int fd = ::open(output_path, O_WRONLY | O_CREAT | O_TRUNC, 0644);
      if (fd >= 0) {
        ::dup2(fd, STDOUT_FILENO);
        ::dup2(fd, STDERR_FILENO);
        ::close(fd);
      }
    }
    ::execv(cargv[0], cargv.data());
    ::_exit(127);
  }
  return pid;
}

}  // namespace

int spawn_child(const std::vector<std::string>& argv, bool quiet) {
  return spawn_with_output(argv, quiet ? "/dev/null" : nullptr);
}

int spawn_child(const std::vector<std::string>& argv,
                const std::string& output_file) {
  return spawn_with_output(argv, output_file.c_str());
}

bool wait_child_exit(int pid, double timeout_s, int* status) {
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(timeout_s));
  int st = 0;
  while (true) {
    const int r = ::waitpid(pid, &st, WNOHANG);
    if (r == pid) {
      if (status) *status = st;
      return true;
    }
    if (r < 0) {
      if (status) *status = -1;
      return true;  // already reaped or not our child
    }
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

void terminate_child(int pid, double grace_s) {
  if (pid <= 0) return;
  ::kill(pid, SIGTERM);
  if (!wait_child_exit(pid, grace_s)) {
    ::kill(pid, SIGKILL);
    wait_child_exit(pid, 2.0);
  }
}

int pick_free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error("io-failure", "socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw Error("io-failure", "bind");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);
  ::close(fd);
  return port;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  ::gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

}  // namespace aginglab
