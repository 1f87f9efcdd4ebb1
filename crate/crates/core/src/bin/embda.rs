fn main() {
    std::process::exit(embda::cli::run(std::env::args_os()));
}
