fn main() {
    std::process::exit(ib_lab::cli::main_with_args(std::env::args_os()));
}
