#include <iostream>

#include "vida/cli.hpp"

int main(int argc, char** argv) { return vida::run_cli(argc, argv, std::cout, std::cerr); }
