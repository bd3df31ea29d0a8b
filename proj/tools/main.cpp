#include "cli.hpp"

int main(int argc, char **argv) { return hjadj::cli::run(argc, argv); }
