fn main() {
    std::process::exit(fracepi::cli::run(std::env::args_os()));
}
