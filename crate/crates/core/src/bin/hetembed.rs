fn main() {
    std::process::exit(hetembed::cli::run(std::env::args()));
}
