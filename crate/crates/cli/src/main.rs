fn main() {
    std::process::exit(permfield_cli::run(std::env::args_os()));
}
