include!("/tmp/bits_body.rs");
fn main() { probe_experiment_bits(); }
