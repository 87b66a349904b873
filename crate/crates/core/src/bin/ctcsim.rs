fn main() {
    std::process::exit(ctcsim::cli::run(std::env::args_os()));
}
