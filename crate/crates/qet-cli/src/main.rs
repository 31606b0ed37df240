fn main() {
    std::process::exit(qet_cli::main_with_args(std::env::args_os()));
}
