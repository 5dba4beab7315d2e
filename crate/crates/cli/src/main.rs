fn main() {
    std::process::exit(pqa_cli::run(std::env::args_os()));
}
