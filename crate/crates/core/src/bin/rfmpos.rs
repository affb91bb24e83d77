fn main() {
    std::process::exit(rfmpos::cli::run(std::env::args_os()));
}
