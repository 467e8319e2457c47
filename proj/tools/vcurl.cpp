#include <string>
#include <vector>

#include "vcurl/cli.hpp"

int main(int argc, char** argv) {
  return vcurl::cli::run(std::vector<std::string>(argv, argv + argc));
}
