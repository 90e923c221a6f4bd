fn main() -> std::process::ExitCode {
    spinorbit_cli::main_exit()
}
