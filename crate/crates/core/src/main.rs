fn main() {
    std::process::exit(monas::cli::run(std::env::args_os()));
}
