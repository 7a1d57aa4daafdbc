#include <iostream>

#include "drmn/cli.hpp"

int main(int argc, char** argv) { return drmn::run_cli(argc, argv, std::cout, std::cerr); }
