fn main() {
    println!("halfwave CLI: under construction");
}
