fn main() -> std::process::ExitCode {
    etapair::cli::main()
}
