fn main() {
    std::process::exit(choquard_core::cli::run(std::env::args_os()));
}
