fn main() {
    std::process::exit(martinet::cli::run(std::env::args_os()));
}
