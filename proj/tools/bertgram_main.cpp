#include <iostream>
#include <string>
#include <vector>

#include "bertgram/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return bertgram::cli::run(args, std::cout, std::cerr);
}
