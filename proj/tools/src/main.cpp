#include "commands.hpp"

int main(int argc, char** argv) { return drunet::cli::run(argc, argv); }
