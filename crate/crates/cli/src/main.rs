fn main() {
    std::process::exit(fdjs_cli::run(std::env::args_os()));
}
