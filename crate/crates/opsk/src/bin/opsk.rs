fn main() {
    std::process::exit(opsk::cli::main_with_args(std::env::args_os()));
}
