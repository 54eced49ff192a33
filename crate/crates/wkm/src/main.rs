fn main() {
    std::process::exit(wkm::cli::run(std::env::args_os()));
}
