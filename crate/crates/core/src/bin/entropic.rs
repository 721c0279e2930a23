fn main() {
    std::process::exit(entropic::cli::run(std::env::args_os()));
}
