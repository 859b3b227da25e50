#include <iostream>

#include "frames/cli.hpp"

int main(int argc, char** argv) { return frames::run_cli(argc, argv, std::cout, std::cerr); }
