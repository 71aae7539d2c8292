#include <iostream>

#include "mlmkl/cli.hpp"

int main(int argc, char** argv) {
  return mlmkl::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
