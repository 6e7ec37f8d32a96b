fn main() {
    std::process::exit(stochbar::cli::run(std::env::args_os()));
}
