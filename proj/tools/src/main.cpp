#include "cli.hpp"

int main(int argc, char** argv) { return utad::cli::run(argc, argv); }
