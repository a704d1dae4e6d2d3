#include <iostream>

#include "cgkqi/cli.hpp"

int main(int argc, char** argv) { return cgkqi::cli::dispatch(argc, argv, std::cout, std::cerr); }
