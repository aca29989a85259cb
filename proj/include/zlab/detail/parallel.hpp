#pragma once

#include <cstddef>
#include <exception>
#include <limits>
#include <thread>
#include <vector>

#include "zlab/errors.hpp"

namespace zlab::detail {

struct ScanOutcome {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_index = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> failed; // ascending node indices that threw
    std::size_t evaluated = 0;
};

/// Deterministic parallel argmax over [0, n). Each worker scans a contiguous
/// ascending range; per-range results are merged in range order with strict
/// improvement, so ties resolve to the lexicographically smallest index and
/// the outcome is bit-identical for any thread count. Nodes that throw
/// zlab::error are recorded as failed and excluded; other exceptions
/// propagate.
template <class Eval>
ScanOutcome deterministic_max_scan(std::size_t n, Eval&& eval, unsigned max_threads = 0) {
    unsigned hw = max_threads ? max_threads : std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    constexpr std::size_t min_chunk = 512;
    unsigned nthreads = 1;
    if (n >= 2 * min_chunk)
        nthreads = static_cast<unsigned>(std::min<std::size_t>(hw, n / min_chunk));

    std::vector<ScanOutcome> partial(nthreads);
    std::vector<std::exception_ptr> errors(nthreads);

    auto work = [&](unsigned t, std::size_t lo, std::size_t hi) {
        ScanOutcome& out = partial[t];
        try {
            for (std::size_t i = lo; i < hi; ++i) {
                double v;
                try {
                    v = eval(i);
                } catch (const zlab::error&) {
                    out.failed.push_back(i);
                    continue;
                }
                ++out.evaluated;
                if (v > out.best) {
                    out.best = v;
                    out.best_index = i;
                }
            }
        } catch (...) {
            errors[t] = std::current_exception();
        }
    };

    if (nthreads == 1) {
        work(0, 0, n);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(nthreads);
        const std::size_t chunk = (n + nthreads - 1) / nthreads;
        for (unsigned t = 0; t < nthreads; ++t) {
            const std::size_t lo = std::min<std::size_t>(n, t * chunk);
            const std::size_t hi = std::min<std::size_t>(n, lo + chunk);
            threads.emplace_back(work, t, lo, hi);
        }
        for (auto& th : threads) th.join();
    }

    for (unsigned t = 0; t < nthreads; ++t)
        if (errors[t]) std::rethrow_exception(errors[t]);

    ScanOutcome merged;
    for (unsigned t = 0; t < nthreads; ++t) {
        const ScanOutcome& p = partial[t];
        if (p.best_index != std::numeric_limits<std::size_t>::max() && p.best > merged.best) {
            merged.best = p.best;
            merged.best_index = p.best_index;
        }
        merged.failed.insert(merged.failed.end(), p.failed.begin(), p.failed.end());
        merged.evaluated += p.evaluated;
    }
    return merged;
}

} // namespace zlab::detail
