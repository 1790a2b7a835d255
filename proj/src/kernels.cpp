#include "noisylab/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace noisylab::kernels {

#if defined(__x86_64__) || defined(_M_X64)
const Ops& avx2_ops();
#endif
#if defined(__aarch64__) || defined(__ARM_NEON)
const Ops& neon_ops();
#endif

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool neon_available() {
#if defined(__aarch64__) || defined(__ARM_NEON)
  return true;
#else
  return false;
#endif
}

namespace {

std::atomic<const Ops*> g_active{nullptr};

const Ops* resolve(std::string_view name) {
  if (name == "scalar") return &scalar();
#if defined(__x86_64__) || defined(_M_X64)
  if (name == "avx2" && avx2_available()) return &avx2_ops();
#endif
#if defined(__aarch64__) || defined(__ARM_NEON)
  if (name == "neon" && neon_available()) return &neon_ops();
#endif
  if (name == "auto" || name.empty()) {
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2_available()) return &avx2_ops();
#endif
#if defined(__aarch64__) || defined(__ARM_NEON)
    if (neon_available()) return &neon_ops();
#endif
    return &scalar();
  }
  return nullptr;
}

}  // namespace

bool select(std::string_view name) {
  const Ops* ops = resolve(name);
  if (!ops) return false;
  g_active.store(ops, std::memory_order_relaxed);
  return true;
}

const Ops& active() {
  const Ops* ops = g_active.load(std::memory_order_relaxed);
  if (!ops) {
    const char* env = std::getenv("NOISYLAB_KERNELS");
    ops = resolve(env ? std::string_view(env) : std::string_view("auto"));
    if (!ops) ops = resolve("auto");
    g_active.store(ops, std::memory_order_relaxed);
  }
  return *ops;
}

}  // namespace noisylab::kernels
