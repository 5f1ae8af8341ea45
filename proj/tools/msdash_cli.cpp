#include <iostream>

#include "msdash/cli.hpp"

int main(int argc, char** argv) { return msdash::run_cli(argc, argv, std::cout, std::cerr); }
