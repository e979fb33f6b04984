#include <iostream>

#include "kix/cli.hpp"

int main(int argc, char** argv) { return kix::run_cli(argc, argv, std::cout, std::cerr); }
