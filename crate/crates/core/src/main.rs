fn main() {
    std::process::exit(multibin::cli::main_with_args(std::env::args_os()));
}
