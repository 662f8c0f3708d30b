fn main() {
    std::process::exit(mrpirnn::cli::run(std::env::args_os()));
}
