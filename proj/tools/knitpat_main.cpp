#include <iostream>

#include "knitpat/app/cli.hpp"

int main(int argc, char** argv) {
  return knitpat::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
