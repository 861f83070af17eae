#include "kgrank/cli.hpp"

int main(int argc, char** argv) { return kgrank::cli::run(argc, argv); }
