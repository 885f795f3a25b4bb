#include "phaseflow/cli.hpp"

int main(int argc, char** argv) { return phaseflow::cli::main_entry(argc, argv); }
