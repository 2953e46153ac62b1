fn main() {
    std::process::exit(unifluct::cli::run(std::env::args_os()));
}
