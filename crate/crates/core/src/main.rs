fn main() {
    std::process::exit(asymlink::cli::main_with_args(std::env::args_os()));
}
