#include "commands.hpp"

int main(int argc, char** argv) { return dclogit::cli::run(argc, argv); }
