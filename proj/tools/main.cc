#include <iostream>
#include <string>
#include <vector>

#include "cotplan/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cotplan::Dispatch(args, std::cout, std::cerr);
}
