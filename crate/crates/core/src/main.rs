fn main() {
    std::process::exit(bbma_core::cli::run(std::env::args_os()));
}
