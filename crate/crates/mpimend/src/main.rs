fn main() {
    std::process::exit(mpimend::commands::run());
}
