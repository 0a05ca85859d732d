//! FLOP counts of the reference autoencoder under both counting conventions.

use fjsim::harness::reference_flops;

fn main() {
    let r = reference_flops();
    println!("layer  in   out  (2n_in-1)n_out  2n_in*n_out");
    for (i, l) in r.layers.iter().enumerate() {
        println!("{i:>5}  {:>3}  {:>3}  {:>14}  {:>11}", l.input, l.output, l.text, l.table);
    }
    println!("total              {:>14}  {:>11}", r.text_total, r.table_total);
    if r.text_total != r.table_total {
        println!("conventions differ by {} FLOPs (one bias add per output)", r.table_total - r.text_total);
    }
}
