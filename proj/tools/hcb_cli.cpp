#include <string>
#include <vector>

#include "hcb/cli.hpp"

int main(int argc, char** argv) {
  return hcb::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
