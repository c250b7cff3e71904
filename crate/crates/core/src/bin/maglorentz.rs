fn main() {
    std::process::exit(maglorentz::cli::main_with_args(std::env::args_os()));
}
