#include "hamlevy/cli.hpp"

int main(int argc, char** argv) { return hamlevy::cli_main(argc, argv); }
