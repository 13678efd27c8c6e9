fn main() {
    std::process::exit(parteetor::cli::run(std::env::args_os()));
}
