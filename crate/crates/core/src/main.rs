fn main() {
    std::process::exit(bernoulli::cli::run(std::env::args_os()));
}
