#include "dadl/dadl.hpp"
#include <gtest/gtest.h>
TEST(Stub_acceptance, Compiles) { SUCCEED(); }
