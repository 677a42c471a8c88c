#include "spconv/cli.hpp"

int main(int argc, char** argv) { return spconv::cli::run(argc, argv); }
