#include <iostream>

#include "avfuse/cli.hpp"

int main(int argc, char** argv) { return avfuse::run_cli(argc, argv, std::cout, std::cerr); }
