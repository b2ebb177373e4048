fn main() {
    std::process::exit(matchlab::cli::main_with_args(std::env::args_os()));
}
