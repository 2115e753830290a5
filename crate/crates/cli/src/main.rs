fn main() {
    std::process::exit(fedrul_cli::main_with_args(std::env::args_os()));
}
