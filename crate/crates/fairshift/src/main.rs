fn main() {
    std::process::exit(fairshift::cli::run(std::env::args_os()));
}
