fn main() {
    println!("netmom");
}
