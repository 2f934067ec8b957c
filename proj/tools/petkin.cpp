#include "petkin/cli.hpp"

int main(int argc, char **argv) { return petkin::cli::run(argc, argv); }
