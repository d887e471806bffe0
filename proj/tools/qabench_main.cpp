#include "qabench/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return qabench::run_cli(argc, argv, std::cout, std::cerr);
}
