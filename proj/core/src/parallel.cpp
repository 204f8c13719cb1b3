#include "bart/parallel.hpp"

#include <cstdlib>
#include <string>

namespace bart {

std::size_t worker_count(std::size_t requested) {
    std::size_t n = requested;
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("BART_IRL_THREADS")) {
        try {
            const long cap = std::stol(env);
            if (cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
        } catch (const std::exception&) {
            // unparsable values are ignored
        }
    }
    return n;
}

}  // namespace bart
