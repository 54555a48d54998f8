#include "cli.hpp"

int main(int argc, char** argv) { return dixon::cli::run(argc, argv); }
