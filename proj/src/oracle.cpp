#include "drc/oracle.hpp"

namespace drc {

const char* test_origin_name(TestOrigin o) {
    switch (o) {
        case TestOrigin::Initial: return "initial";
        case TestOrigin::SplitAttempt: return "split-attempt";
        case TestOrigin::Edited: return "edited";
    }
    return "?";
}

}  // namespace drc
