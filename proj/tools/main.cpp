#include <string>
#include <vector>

#include "roadtoll/commands.hpp"

int main(int argc, char* argv[]) {
  return roadtoll::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
