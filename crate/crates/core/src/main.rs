fn main() {
    std::process::exit(monocone::cli::run(std::env::args_os()));
}
