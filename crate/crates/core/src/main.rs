fn main() {
    std::process::exit(lipjet::cli::run(std::env::args_os()));
}
