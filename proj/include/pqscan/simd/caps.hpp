#pragma once

#include <string>

namespace pqscan {

// What the host and this build can run. A kernel family is usable only when
// its instructions are both compiled in and reported by the CPU.
struct SimdCaps {
    bool ssse3 = false;
    bool avx2 = false;
    bool avx512bw = false;
    bool avx512vbmi = false;

    static SimdCaps compiled() {
        SimdCaps c;
#if defined(__SSSE3__)
        c.ssse3 = true;
#endif
#if defined(__AVX2__)
        c.avx2 = true;
#endif
#if defined(__AVX512BW__)
        c.avx512bw = true;
#endif
#if defined(__AVX512VBMI__) && defined(__AVX512BW__)
        c.avx512vbmi = true;
#endif
        return c;
    }

    static SimdCaps runtime() {
        SimdCaps c;
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
        __builtin_cpu_init();
        c.ssse3 = __builtin_cpu_supports("ssse3");
        c.avx2 = __builtin_cpu_supports("avx2");
        c.avx512bw = __builtin_cpu_supports("avx512bw");
        c.avx512vbmi = __builtin_cpu_supports("avx512vbmi");
#endif
        return c;
    }

    static SimdCaps available() {
        SimdCaps comp = compiled(), run = runtime();
        return {comp.ssse3 && run.ssse3, comp.avx2 && run.avx2, comp.avx512bw && run.avx512bw,
                comp.avx512vbmi && run.avx512vbmi};
    }

    std::string describe() const {
        std::string s;
        auto add = [&](const char* name, bool on) {
            if (!s.empty()) s += ' ';
            s += name;
            s += on ? "+" : "-";
        };
        add("ssse3", ssse3);
        add("avx2", avx2);
        add("avx512bw", avx512bw);
        add("avx512vbmi", avx512vbmi);
        return s;
    }
};

} // namespace pqscan
