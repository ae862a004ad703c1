#include <string>
#include <vector>

#include "cqreg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cqreg::run_cli(args);
}
