#include "rewts/cli.hpp"

int main(int argc, char** argv) { return rewts::cli::main(argc, argv); }
