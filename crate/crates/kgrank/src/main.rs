fn main() {
    std::process::exit(kgrank::cli::run(std::env::args_os()));
}
