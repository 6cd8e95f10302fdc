fn main() -> std::process::ExitCode {
    graspd::cli::main()
}
