fn main() {
    std::process::exit(essdesign::cli::run(std::env::args_os()));
}
