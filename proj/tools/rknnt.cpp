#include "rknnt/cli.hpp"

int main(int argc, char** argv) { return rknnt::cli::run(argc, argv); }
