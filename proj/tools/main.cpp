#include "more/cli.hpp"

int main(int argc, char** argv) { return more::cli::run(argc, argv); }
