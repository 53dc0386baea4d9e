fn main() {
    std::process::exit(predspace::cli::run());
}
