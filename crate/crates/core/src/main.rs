fn main() {
    std::process::exit(paramint::cli::run(std::env::args_os()));
}
