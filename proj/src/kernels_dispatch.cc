#include <cstdlib>
#include <stdexcept>
#include <string>

#include "shem/kernels.h"

namespace shem::kernels {

#ifndef SHEM_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable* pick_initial() {
  if (const char* env = std::getenv("SHEM_ISA")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_table();
    if (want == "avx2" && avx2_table() && cpu_supports_avx2()) {
      return avx2_table();
    }
  }
  if (avx2_table() && cpu_supports_avx2()) return avx2_table();
  return &scalar_table();
}

const KernelTable*& current() {
  static const KernelTable* table = pick_initial();
  return table;
}

}  // namespace

const KernelTable& active() { return *current(); }

void set_active(Isa isa) {
  if (isa == Isa::kScalar) {
    current() = &scalar_table();
    return;
  }
  if (!avx2_table() || !cpu_supports_avx2()) {
    throw std::runtime_error("AVX2 kernels unavailable on this machine");
  }
  current() = avx2_table();
}

std::string_view isa_name(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

}  // namespace shem::kernels
