fn main() {
    std::process::exit(riviv::cli::run(std::env::args_os()));
}
