#include <gtest/gtest.h>

#include "domaingcn/runtime.hpp"

int main(int argc, char** argv) {
  domaingcn::TuneAllocatorForTraining();
  ::testing::InitGoogleTest(&argc, argv);
  return RUN_ALL_TESTS();
}
