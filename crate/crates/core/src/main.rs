fn main() { std::process::exit(fredholm::cli::run()); }
