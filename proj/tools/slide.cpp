#include "slide/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return slide::run_cli(argc, argv, std::cout, std::cerr); }
