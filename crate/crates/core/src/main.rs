fn main() {
    std::process::exit(dirichlet_shift::cli::run(std::env::args_os()));
}
