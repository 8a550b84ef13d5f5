fn main() -> std::process::ExitCode {
    scaled_poisson::cli::main()
}
