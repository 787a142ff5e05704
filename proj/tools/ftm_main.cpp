#include "ftm/cli.hpp"

int main(int argc, char** argv) {
  return ftm::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
