fn main() {
    std::process::exit(parimplode::cli::run(std::env::args_os()));
}
