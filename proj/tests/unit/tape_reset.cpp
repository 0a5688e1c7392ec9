#include <gtest/gtest.h>

#include "hcq/tensor.hpp"

namespace {

// Every test starts from an empty, unconsumed tape.
class TapeReset : public ::testing::EmptyTestEventListener {
  void OnTestStart(const ::testing::TestInfo&) override { hcq::Tape::active().reset(); }
};

const bool registered = [] {
  ::testing::UnitTest::GetInstance()->listeners().Append(new TapeReset);
  return true;
}();

}  // namespace
