fn main() {
    std::process::exit(covsel_cli::main_with(std::env::args_os()));
}
