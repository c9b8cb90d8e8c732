fn main() {
    std::process::exit(maxmargin::cli::main_with_args(std::env::args_os()));
}
