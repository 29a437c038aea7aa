#include <iostream>

#include "wgnet/cli_io.hpp"

int main(int argc, char** argv) { return wgnet::run_cli(argc, argv, std::cout, std::cerr); }
