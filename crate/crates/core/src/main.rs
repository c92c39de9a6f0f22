fn main() -> std::process::ExitCode {
    epod::cli::main()
}
