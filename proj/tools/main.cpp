#include "commands.hpp"

int main(int argc, char** argv) {
  return sre::cli::run(std::vector<std::string>(argv, argv + argc));
}
