#include <iostream>

#include "gaitlab/cli.hpp"

int main(int argc, char** argv) { return gaitlab::run_cli(argc, argv, std::cout, std::cerr); }
