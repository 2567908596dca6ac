#include <iostream>

#include "refacer_cli/dispatch.hpp"

int main(int argc, char** argv) { return refacer::cli::dispatch(argc, argv, std::cout, std::cerr); }
