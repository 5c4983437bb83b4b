#include "craniotk/parallel.hpp"

#include <cstdlib>
#include <string>

namespace craniotk {

int resolve_thread_count(int requested) {
    if (requested > 0) {
        return requested;
    }
    if (const char* env = std::getenv("CRANIOTK_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) {
                return n;
            }
        } catch (const std::exception&) {
            // unparsable values fall through to the hardware default
        }
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

} // namespace craniotk
