#pragma once

#include <cstddef>

namespace testing_support {

/// Number of global operator new calls since program start, on any thread.
std::size_t allocation_count() noexcept;

}  // namespace testing_support
