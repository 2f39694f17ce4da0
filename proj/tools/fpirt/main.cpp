#include <iostream>

#include "app.hpp"

int main(int argc, char** argv) { return fpirt::cli::run(argc, argv, std::cout, std::cerr); }
