fn main() {
    std::process::exit(corn::cli::run(std::env::args_os()));
}
