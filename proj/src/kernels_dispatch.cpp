// SPDX-License-Identifier: Apache-2.0
#include "covpool/kernels.hpp"

#include <atomic>

#include "covpool/error.hpp"

namespace covpool::kern {
namespace {

std::atomic<const Kernels*> g_active{nullptr};
std::atomic<Backend> g_selected{Backend::Auto};

const Kernels* resolve(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return &scalar_kernels();
    case Backend::Avx2:
      return avx2_kernels();
    case Backend::Neon:
      return neon_kernels();
    case Backend::Auto:
      if (const Kernels* k = avx2_kernels()) return k;
      if (const Kernels* k = neon_kernels()) return k;
      return &scalar_kernels();
  }
  return &scalar_kernels();
}

}  // namespace

const Kernels& active() {
  const Kernels* k = g_active.load(std::memory_order_acquire);
  if (!k) {
    k = resolve(Backend::Auto);
    g_active.store(k, std::memory_order_release);
  }
  return *k;
}

void select(Backend b) {
  const Kernels* k = resolve(b);
  if (!k) throw DomainError("requested kernel backend is not available on this CPU");
  g_active.store(k, std::memory_order_release);
  g_selected.store(b, std::memory_order_release);
}

Backend selected() { return g_selected.load(std::memory_order_acquire); }

}  // namespace covpool::kern
