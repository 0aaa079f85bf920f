#pragma once

// Hot Hamming scans are compiled twice and the variant is picked at load
// time, so CPUs with a popcount instruction use it without the build
// requiring one.
#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__) && defined(__linux__)
#define CRISISFILTER_POPCNT_CLONES __attribute__((target_clones("popcnt", "default")))
#else
#define CRISISFILTER_POPCNT_CLONES
#endif
