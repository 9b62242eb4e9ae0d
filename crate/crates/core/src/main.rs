fn main() {
    std::process::exit(edcr::cli::run(std::env::args_os()));
}
