fn main() {
    std::process::exit(dynident::cli::run(std::env::args_os()))
}
