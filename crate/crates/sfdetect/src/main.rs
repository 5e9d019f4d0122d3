fn main() {
    std::process::exit(sfdetect::cli::run_from(std::env::args_os()));
}
