#include <iostream>

#include "dotrag/cli.hpp"

int main(int argc, char** argv) { return dotrag::run_cli(argc, argv, std::cout, std::cerr); }
