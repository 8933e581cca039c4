#include <iostream>

#include "mixens/cli.hpp"

int main(int argc, char** argv) { return mixens::run_cli(argc, argv, std::cout, std::cerr); }
