#include <iostream>

#include "rgan/cli.hpp"

int main(int argc, char** argv) { return rgan::run_cli(argc, argv, std::cout, std::cerr); }
