fn main() { println!("{}", polaron_core::probe()); }
