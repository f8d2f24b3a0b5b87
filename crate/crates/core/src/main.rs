fn main() {
    std::process::exit(madom::harness::cli::main_with_args(std::env::args_os()));
}
