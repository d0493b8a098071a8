fn main() {
    println!("qwalk");
}
