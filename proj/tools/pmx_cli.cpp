#include "pmx/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return pmx::run_cli(argc, argv, std::cout, std::cerr); }
