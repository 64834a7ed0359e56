#include "cli.hpp"

int main(int argc, char** argv) { return emsca::cli::run(argc, argv); }
