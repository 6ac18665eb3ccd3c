#include "dtd/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace dtd::kernels {

bool avx2_available() {
#if (defined(__x86_64__) || defined(_M_X64)) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

const Ops& select() {
    const char* force = std::getenv("DTD_KERNELS");
    if (force != nullptr) {
        if (std::strcmp(force, "scalar") == 0) return scalar_ops();
#if defined(__x86_64__) || defined(_M_X64)
        if (std::strcmp(force, "avx2") == 0 && avx2_available()) return avx2_ops();
#endif
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2_available()) return avx2_ops();
#endif
    return scalar_ops();
}

}  // namespace

const Ops& active_ops() {
    static const Ops& ops = select();
    return ops;
}

std::string active_name() { return active_ops().name; }

}  // namespace dtd::kernels
