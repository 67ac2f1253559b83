#include <malloc.h>

#include <iostream>

#include "isacfusion/cli.hpp"

int main(int argc, char** argv) {
    // Radar frames are several MB each; keep them on the heap instead of
    // fresh mmaps so every frame does not pay for page faults.
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return isac::cli::run(argc, argv, std::cout, std::cerr);
}
