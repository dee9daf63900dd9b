#include <iostream>

#include "kstate_cli.hpp"

int main(int argc, char** argv) { return kstate::cli::run(argc, argv, std::cout, std::cerr); }
