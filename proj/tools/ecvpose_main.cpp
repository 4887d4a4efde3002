#include <string>
#include <vector>

#include "ecvpose/ecvpose.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return ecvpose::run_pipeline(args);
}
