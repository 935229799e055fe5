#include <string>
#include <vector>

#include "zenmet/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return zenmet::cli::main_impl(args);
}
