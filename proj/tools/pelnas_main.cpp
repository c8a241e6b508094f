#include "cli_app.hpp"

int main(int argc, char** argv) { return pelnas::cli::run(argc, argv); }
