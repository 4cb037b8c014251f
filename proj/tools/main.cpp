#include <vector>
#include <string>

#include "stlf/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return stlf::cli_main(args);
}
