fn main() {
    strat_rk::cli::main()
}
