#include "crcbn/cli.hpp"

int main(int argc, char** argv) { return crcbn::cli::run(argc, argv); }
