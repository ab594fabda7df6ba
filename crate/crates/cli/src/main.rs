fn main() {
    std::process::exit(ideation_cli::run(std::env::args_os()));
}
