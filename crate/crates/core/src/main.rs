fn main() {
    std::process::exit(bernoulli_lab::cli::run(std::env::args_os()));
}
