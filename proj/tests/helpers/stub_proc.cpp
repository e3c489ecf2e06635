// Test helper process with controllable memory behavior.
//
//   stub_proc alloc    --mb N --after-s S --duration-s D [--ready-file F]
//   stub_proc leak     --rate-mb-s R --duration-s D
//   stub_proc constant --duration-s D
//
// alloc: waits, allocates-and-touches N MB, touches the ready file, idles.
// leak: retains R MB per second, touched, until the duration ends.
// constant: idles with a flat footprint.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <thread>
#include <vector>

namespace {

double flag(int argc, char** argv, const char* name, double fallback) {
  for (int i = 0; i < argc - 1; ++i) {
    if (std::strcmp(argv[i], name) == 0) return std::atof(argv[i + 1]);
  }
  return fallback;
}

const char* flag_str(int argc, char** argv, const char* name) {
  for (int i = 0; i < argc - 1; ++i) {
    if (std::strcmp(argv[i], name) == 0) return argv[i + 1];
  }
  return nullptr;
}

std::vector<char>* touch_block(std::size_t bytes) {
  auto* block = new std::vector<char>(bytes);
  for (std::size_t i = 0; i < bytes; i += 4096) {
    (*block)[i] = static_cast<char>(i);
  }
  return block;
}

void idle_until(std::chrono::steady_clock::time_point deadline) {
  while (std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) return 2;
  const std::string mode = argv[1];
  const auto start = std::chrono::steady_clock::now();
  const double duration_s = flag(argc, argv, "--duration-s", 10.0);
  const auto deadline =
      start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                  std::chrono::duration<double>(duration_s));

  std::vector<std::vector<char>*> retained;

  if (mode == "alloc") {
    const double after_s = flag(argc, argv, "--after-s", 1.0);
    const double mb = flag(argc, argv, "--mb", 100.0);
    std::this_thread::sleep_for(std::chrono::duration<double>(after_s));
    retained.push_back(
        touch_block(static_cast<std::size_t>(mb * 1024.0 * 1024.0)));
    if (const char* ready = flag_str(argc, argv, "--ready-file")) {
      if (FILE* f = std::fopen(ready, "w")) {
        std::fputs("ready\n", f);
        std::fclose(f);
      }
    }
    idle_until(deadline);
  } else if (mode == "leak") {
    const double rate_mb_s = flag(argc, argv, "--rate-mb-s", 1.0);
    const std::size_t chunk =
        static_cast<std::size_t>(rate_mb_s * 1024.0 * 1024.0 / 10.0);
    while (std::chrono::steady_clock::now() < deadline) {
      retained.push_back(touch_block(chunk));  // 10 chunks per second
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  } else if (mode == "constant") {
    idle_until(deadline);
  } else {
    return 2;
  }

  for (auto* block : retained) delete block;
  return 0;
}
