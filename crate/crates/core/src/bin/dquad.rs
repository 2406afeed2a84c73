fn main() {
    std::process::exit(dquad::cli::run(std::env::args_os()));
}
