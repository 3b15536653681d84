#include "see/cli.hpp"

int main(int argc, char** argv) { return see::cli::run(argc, argv); }
