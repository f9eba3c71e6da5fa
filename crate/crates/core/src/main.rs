fn main() {
    std::process::exit(discocat::cli::run(std::env::args_os()));
}
