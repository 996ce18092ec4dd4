#include "diagd/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return diagd::cli::run(argc, argv, std::cout, std::cerr);
}
