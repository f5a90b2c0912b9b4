fn main() {
    std::process::exit(clear::cli::run(std::env::args_os()));
}
